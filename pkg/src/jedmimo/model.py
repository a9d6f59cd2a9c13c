"""System dimensions, channel models, and the noisy linear observation model.

Complex Gaussian convention used throughout the package: CN(0, s^2) has
real and imaginary parts each N(0, s^2/2), so E|z|^2 = s^2.
"""

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation
from .errors import ConfigurationError, ShapeError

_PSD_TOL = 1e-10
_DIAG_TOL = 1e-9


@dataclass(frozen=True)
class SystemDims:
    """Antenna/user/slot counts for one coherence block of K = P + D slots."""

    n_rx: int
    n_users: int
    n_pilots: int
    n_data: int

    def __post_init__(self):
        if self.n_rx < 1 or self.n_users < 1:
            raise ConfigurationError("n_rx and n_users must be positive")
        if self.n_pilots < 0 or self.n_data < 0:
            raise ConfigurationError("n_pilots and n_data must be non-negative")
        if self.k_slots < 1:
            raise ConfigurationError("need at least one slot (pilots + data)")

    @property
    def k_slots(self) -> int:
        return self.n_pilots + self.n_data


def complex_normal(rng: np.random.Generator, shape, var: float = 1.0) -> np.ndarray:
    """Draw CN(0, var) entries (circularly symmetric complex Gaussian)."""
    if var < 0:
        raise ConfigurationError(f"variance must be non-negative, got {var}")
    scale = float(np.sqrt(var / 2.0))
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _check_correlation(name: str, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.complex128)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ConfigurationError(f"{name} must be a square matrix")
    if not np.allclose(r, r.conj().T, atol=1e-12):
        raise ConfigurationError(f"{name} must be Hermitian")
    if np.abs(np.diagonal(r).real - 1.0).max() > _DIAG_TOL:
        raise ConfigurationError(f"{name} must have unit diagonal")
    w = np.linalg.eigvalsh(r)
    if w.min() < -_PSD_TOL * max(w.max(), 1.0):
        raise ConfigurationError(f"{name} is not positive semidefinite (min eig {w.min():.3e})")
    return r


def _psd_sqrt(r: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(r)
    w = np.clip(w, 0.0, None)
    return (u * np.sqrt(w)) @ u.conj().T


@dataclass(frozen=True)
class IidGaussianChannel:
    """Entries i.i.d. CN(0, 1)."""

    @property
    def descriptor(self) -> str:
        return "iid_gaussian"


@dataclass(frozen=True)
class KroneckerChannel:
    """Separable correlation: H = R_rx^(1/2) G R_tx^(1/2) with G i.i.d. CN(0,1).

    Both correlation matrices must be Hermitian PSD with unit diagonal.
    """

    r_rx: np.ndarray
    r_tx: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r_rx", _check_correlation("r_rx", self.r_rx))
        object.__setattr__(self, "r_tx", _check_correlation("r_tx", self.r_tx))
        object.__setattr__(self, "_sqrt_rx", _psd_sqrt(self.r_rx))
        object.__setattr__(self, "_sqrt_tx", _psd_sqrt(self.r_tx))

    @property
    def descriptor(self) -> str:
        return "kronecker"


ChannelModel = IidGaussianChannel | KroneckerChannel


def exponential_correlation(n: int, rho: float) -> np.ndarray:
    """rho^|i-j| correlation matrix (real, unit diagonal, PSD for |rho| < 1)."""
    if not 0.0 <= rho < 1.0:
        raise ConfigurationError(f"correlation coefficient must be in [0, 1), got {rho}")
    idx = np.arange(n)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def sample_channel(model: ChannelModel, dims: SystemDims, rng: np.random.Generator) -> np.ndarray:
    """Draw one n_rx x n_users channel realization."""
    g = complex_normal(rng, (dims.n_rx, dims.n_users))
    if isinstance(model, IidGaussianChannel):
        return g
    if isinstance(model, KroneckerChannel):
        if model.r_rx.shape[0] != dims.n_rx or model.r_tx.shape[0] != dims.n_users:
            raise ConfigurationError(
                f"correlation sizes {model.r_rx.shape[0]}x{model.r_tx.shape[0]} "
                f"do not match dims {dims.n_rx}x{dims.n_users}"
            )
        return model._sqrt_rx @ g @ model._sqrt_tx
    raise ConfigurationError(f"unknown channel model {model!r}")


def sample_symbols(
    c: Constellation, n_users: int, n_slots: int, rng: np.random.Generator
) -> np.ndarray:
    """Uniform i.i.d. draws from the constellation, shape (n_users, n_slots)."""
    idx = rng.integers(0, c.order, size=(n_users, n_slots))
    return c.points[idx]


def forward(H: np.ndarray, X: np.ndarray, sigma0: float, rng: np.random.Generator) -> np.ndarray:
    """Observe Y = H X + Z with Z entries CN(0, sigma0^2).

    sigma0 = 0 is the exact noiseless product and does not consume rng.
    """
    H = np.asarray(H)
    X = np.asarray(X)
    if H.ndim != 2 or X.ndim != 2 or H.shape[1] != X.shape[0]:
        raise ShapeError(f"inner dimensions disagree: H {H.shape}, X {X.shape}")
    if sigma0 < 0:
        raise ConfigurationError(f"sigma0 must be non-negative, got {sigma0}")
    Y = H @ X
    if sigma0 > 0:
        Y = Y + complex_normal(rng, Y.shape, sigma0**2)
    return Y


def sigma0_from_snr(snr_db: float, dims: SystemDims) -> float:
    """Noise std for an average per-antenna receive SNR.

    With unit-power symbols and unit-variance channel entries the received
    signal power per antenna is n_users, so sigma0^2 = n_users / 10^(snr/10).
    """
    return float(np.sqrt(dims.n_users / 10.0 ** (snr_db / 10.0)))
