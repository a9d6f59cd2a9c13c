"""Classical channel estimators, detectors, and the NMSE/SER metrics."""

from dataclasses import dataclass

import numpy as np

from .constellation import Constellation, hard_decision
from .errors import CapacityError, ContractError, RankError, ShapeError, UndefinedResultError

ML_SEARCH_CAP = 10**6
_ML_CHUNK = 4096


@dataclass(frozen=True)
class TrialOutcome:
    """One Monte Carlo trial's metrics for one method."""

    method: str
    snr_db: float
    nmse: float
    ser: float
    n_rx: int
    n_users: int
    n_pilots: int
    n_data: int
    trial: int
    seed: int


def ls_channel_estimate(Y_P: np.ndarray, X_P: np.ndarray) -> np.ndarray:
    """Pilot least squares: H = Y_P X_P^H (X_P X_P^H)^-1. Needs P >= n_users."""
    Y_P, X_P = np.asarray(Y_P), np.asarray(X_P)
    n_users, n_pilots = X_P.shape
    if n_pilots < n_users:
        raise RankError(f"underdetermined: {n_pilots} pilots for {n_users} users")
    gram = X_P @ X_P.conj().T
    try:
        return np.linalg.solve(gram.T, (Y_P @ X_P.conj().T).T).T
    except np.linalg.LinAlgError as e:
        raise RankError(f"pilot Gram matrix is singular: {e}") from e


def lmmse_channel_estimate(
    Y_P: np.ndarray, X_P: np.ndarray, sigma0: float, prior_var: float = 1.0
) -> np.ndarray:
    """Linear MMSE estimate for i.i.d. CN(0, prior_var) channel entries."""
    Y_P, X_P = np.asarray(Y_P), np.asarray(X_P)
    n_users = X_P.shape[0]
    gram = X_P @ X_P.conj().T
    gram[np.arange(n_users), np.arange(n_users)] += sigma0**2 / prior_var
    return np.linalg.solve(gram.T, (Y_P @ X_P.conj().T).T).T


def mmse_detect(Y_D: np.ndarray, H: np.ndarray, sigma0: float, c: Constellation) -> np.ndarray:
    """LMMSE equalize then slice: hard_decision(H^H (H H^H + sigma0^2 I)^-1 Y_D)."""
    Y_D, H = np.asarray(Y_D), np.asarray(H)
    n_rx = H.shape[0]
    gram = H @ H.conj().T
    gram[np.arange(n_rx), np.arange(n_rx)] += sigma0**2
    return hard_decision(H.conj().T @ np.linalg.solve(gram, Y_D), c)


def ml_detect_bruteforce(Y_D: np.ndarray, H: np.ndarray, c: Constellation) -> np.ndarray:
    """Exact per-column argmin of ||y - H x||^2 over all constellation vectors.

    Enumerates order^n_users candidates (capped at 10^6), in chunks to bound
    memory. Small-instance oracle only.
    """
    Y_D, H = np.asarray(Y_D), np.asarray(H)
    n_users = H.shape[1]
    n_cand = c.order**n_users
    if n_cand > ML_SEARCH_CAP:
        raise CapacityError(
            f"{c.order}^{n_users} = {n_cand} candidates exceeds the {ML_SEARCH_CAP} cap"
        )
    n_cols = Y_D.shape[1]
    best_d2 = np.full(n_cols, np.inf)
    best_x = np.zeros((n_users, n_cols), dtype=np.complex128)
    digits = c.order ** np.arange(n_users)
    for start in range(0, n_cand, _ML_CHUNK):
        idx = np.arange(start, min(start + _ML_CHUNK, n_cand))
        cand = c.points[(idx[:, None] // digits) % c.order]      # (chunk, n_users)
        hc = cand @ H.T                                          # (chunk, n_rx)
        d2 = (np.abs(Y_D.T[None, :, :] - hc[:, None, :]) ** 2).sum(axis=2)
        arg = d2.argmin(axis=0)                                  # (n_cols,)
        val = d2[arg, np.arange(n_cols)]
        better = val < best_d2
        best_d2[better] = val[better]
        best_x[:, better] = cand[arg[better]].T
    return best_x


def nmse(H: np.ndarray, H_hat: np.ndarray) -> float:
    """||H - H_hat||_F^2 / ||H||_F^2 (linear; report 10*log10 for dB)."""
    H, H_hat = np.asarray(H), np.asarray(H_hat)
    if H.shape != H_hat.shape:
        raise ShapeError(f"shape mismatch: {H.shape} vs {H_hat.shape}")
    denom = np.linalg.norm(H) ** 2
    if denom == 0:
        raise UndefinedResultError("NMSE is undefined for a zero reference channel")
    return float(np.linalg.norm(H - H_hat) ** 2 / denom)


def ser(X_true: np.ndarray, X_decided: np.ndarray, c: Constellation) -> float:
    """Fraction of differing entries; both matrices must lie in the point set."""
    X_true, X_decided = np.asarray(X_true), np.asarray(X_decided)
    if X_true.shape != X_decided.shape:
        raise ShapeError(f"shape mismatch: {X_true.shape} vs {X_decided.shape}")
    for name, X in (("X_true", X_true), ("X_decided", X_decided)):
        if not (X[..., None] == c.points).any(axis=-1).all():
            raise ContractError(f"{name} has entries outside the constellation")
    if X_true.size == 0:
        return 0.0
    return float(np.mean(X_true != X_decided))
