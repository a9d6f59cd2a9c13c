"""Score functions of the joint posterior over data symbols and channel.

Four pieces, combined additively per variable:

* symbol likelihood guidance, through an inflated-variance Gaussian
  approximation solved on the n_users-sized normal system;
* channel likelihood guidance over all K slots (pilots included);
* annealed symbol prior, the Gaussian-mixture posterior-mean identity;
* channel prior, either the closed-form Gaussian score or a learned
  feed-forward network.
"""

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, hard_decision  # noqa: F401  (re-export)
from .errors import ConfigurationError, NumericalError, ShapeError
from .kernels import posterior_mean
from .weights import ScoreModelWeights, evaluate_score_network


@dataclass(frozen=True)
class NoiseLevelState:
    """Annealing and measurement noise stds at one level."""

    sigma_x: float
    sigma_h: float
    sigma0: float

    def __post_init__(self):
        if self.sigma_x < 0 or self.sigma_h < 0:
            raise ConfigurationError("annealing stds must be non-negative")
        if self.sigma0 <= 0:
            raise ConfigurationError("measurement noise std must be positive")


@dataclass(frozen=True)
class GaussianChannelPrior:
    """Closed-form prior for i.i.d. CN(0, variance) channel entries."""

    variance: float = 1.0

    def __post_init__(self):
        if self.variance <= 0:
            raise ConfigurationError("prior variance must be positive")


@dataclass(frozen=True)
class LearnedChannelPrior:
    """Prior score parameterized by a feed-forward network."""

    weights: ScoreModelWeights


ChannelPrior = GaussianChannelPrior | LearnedChannelPrior


def likelihood_score_symbols(
    Y_D: np.ndarray, Xd: np.ndarray, H: np.ndarray, state: NoiseLevelState
) -> np.ndarray:
    """Likelihood guidance for the data symbols.

    Solves (sigma0^2 I + sigma_x^2 H^H H) S = H^H (Y_D - H Xd), the
    n_users x n_users form of the inflated-variance score; by the
    push-through identity it equals the n_rx x n_rx form but costs
    O(n_users^3). sigma_x = 0 reduces to H^H (Y_D - H Xd) / sigma0^2.
    """
    Y_D, Xd, H = np.asarray(Y_D), np.asarray(Xd), np.asarray(H)
    n_rx, n_users = H.shape
    if Y_D.shape[0] != n_rx or Xd.shape[0] != n_users or Y_D.shape[1] != Xd.shape[1]:
        raise ShapeError(
            f"inconsistent shapes: Y_D {Y_D.shape}, Xd {Xd.shape}, H {H.shape}"
        )
    Hh = H.conj().T
    A = (state.sigma_x**2) * (Hh @ H)
    A[np.arange(n_users), np.arange(n_users)] += state.sigma0**2
    try:
        return np.linalg.solve(A, Hh @ (Y_D - H @ Xd))
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"regularized normal matrix is singular: {e}") from e


def likelihood_score_channel(
    Y: np.ndarray, X: np.ndarray, H: np.ndarray, state: NoiseLevelState
) -> np.ndarray:
    """Likelihood guidance for the channel: (Y - H X) X^H / (sigma0^2 + sigma_h^2).

    X is the full K-slot symbol block, pilot columns included.
    """
    Y, X, H = np.asarray(Y), np.asarray(X), np.asarray(H)
    if Y.shape[0] != H.shape[0] or X.shape[0] != H.shape[1] or Y.shape[1] != X.shape[1]:
        raise ShapeError(f"inconsistent shapes: Y {Y.shape}, X {X.shape}, H {H.shape}")
    return ((Y - H @ X) @ X.conj().T) / (state.sigma0**2 + state.sigma_h**2)


def denoiser_expectation(x: complex, sigma_x: float, c: Constellation) -> complex:
    """Posterior-mean denoiser for one noisy symbol (convex combination of points)."""
    if sigma_x <= 0:
        raise ConfigurationError("denoiser needs sigma_x > 0; use hard_decision at 0")
    out = posterior_mean(np.array([[x]], dtype=np.complex128), c.points, float(sigma_x))
    return complex(out[0, 0])


def prior_score_symbols(Xd: np.ndarray, sigma_x: float, c: Constellation) -> np.ndarray:
    """Annealed symbol prior score: (E[x | x~] - x~) / sigma_x^2, elementwise."""
    if sigma_x <= 0:
        raise ConfigurationError("prior score needs sigma_x > 0")
    Xd = np.asarray(Xd, dtype=np.complex128)
    return (posterior_mean(Xd, c.points, float(sigma_x)) - Xd) / (sigma_x**2)


def prior_score_channel(H: np.ndarray, sigma_h: float, prior: ChannelPrior) -> np.ndarray:
    """Channel prior score at annealing level sigma_h.

    Gaussian variant: -H / (variance + sigma_h^2), the exact score of the
    prior convolved with CN(0, sigma_h^2) annealing noise. Learned variant:
    feed-forward evaluation conditioned on sigma_h.
    """
    if sigma_h < 0:
        raise ConfigurationError("sigma_h must be non-negative")
    H = np.asarray(H, dtype=np.complex128)
    if isinstance(prior, GaussianChannelPrior):
        return -H / (prior.variance + sigma_h**2)
    if isinstance(prior, LearnedChannelPrior):
        return evaluate_score_network(prior.weights, H, sigma_h)
    raise ConfigurationError(f"unknown channel prior {prior!r}")


def joint_posterior_scores(
    Y: np.ndarray,
    Xd: np.ndarray,
    H: np.ndarray,
    X_P: np.ndarray,
    state: NoiseLevelState,
    prior: ChannelPrior,
    c: Constellation,
) -> tuple[np.ndarray, np.ndarray]:
    """Joint posterior scores: exact sums of the likelihood and prior terms.

    Pilot columns come first: the symbol guidance sees only the data columns
    Y[:, P:], the channel guidance sees all K columns.
    """
    X_P = np.asarray(X_P)
    n_pilots = X_P.shape[1]
    X_full = np.concatenate([X_P, Xd], axis=1)
    score_x = likelihood_score_symbols(Y[:, n_pilots:], Xd, H, state) + prior_score_symbols(
        Xd, state.sigma_x, c
    )
    score_h = likelihood_score_channel(Y, X_full, H, state) + prior_score_channel(
        H, state.sigma_h, prior
    )
    return score_x, score_h
