"""Hot numeric kernels, in numba and pure-numpy flavors.

The per-entry Gaussian-mixture posterior mean and the per-level Langevin
sweep dominate runtime; both exist as an ``@njit`` kernel and a numpy
fallback with identical semantics. ``_backend.USE_NUMBA`` picks the
default; callers can force a flavor explicitly (the benchmark does).
"""

import numpy as np

from ._backend import HAS_NUMBA, USE_NUMBA


def posterior_mean_numpy(x: np.ndarray, points: np.ndarray, sigma: float) -> np.ndarray:
    """Elementwise E[x | x~] under an equal-weight Gaussian mixture on `points`.

    Softmax responsibilities exp(-|x~ - x_k|^2 / (2 sigma^2)), computed with
    max subtraction so arbitrarily small sigma / large |x~| stay finite.
    """
    d2 = np.abs(x[..., None] - points) ** 2
    logits = d2 / (-2.0 * sigma * sigma)
    logits -= logits.max(axis=-1, keepdims=True)
    w = np.exp(logits)
    return (w @ points) / w.sum(axis=-1)


def _level_sweep_core_numpy(
    Y, X_full, Xd, H, n_pilots, points,
    sigma_x, sigma_h, sigma0, eps_x, eps_h, noise_amp_x, noise_amp_h,
    prior_var, noise_x, noise_h, update_h,
):
    """One annealing level: T alternating symbol/channel updates in place.

    Returns the first step index at which an iterate went non-finite, or -1.
    The channel update always consumes the just-updated symbol block.
    """
    n_steps = noise_x.shape[0]
    n_users = H.shape[1]
    n_data = Xd.shape[1]
    s0sq = sigma0 * sigma0
    denom_h = s0sq + sigma_h * sigma_h
    prior_denom = prior_var + sigma_h * sigma_h
    for k in range(n_steps):
        if n_data > 0:
            Hh = H.conj().T
            A = (sigma_x * sigma_x) * (Hh @ H)
            A[np.arange(n_users), np.arange(n_users)] += s0sq
            resid_d = Y[:, n_pilots:] - H @ Xd
            guide_x = np.linalg.solve(A, Hh @ resid_d)
            prior_x = (posterior_mean_numpy(Xd, points, sigma_x) - Xd) / (sigma_x * sigma_x)
            Xd += eps_x * (guide_x + prior_x) + noise_amp_x * noise_x[k]
            X_full[:, n_pilots:] = Xd
        if update_h:
            guide_h = ((Y - H @ X_full) @ X_full.conj().T) / denom_h
            H += eps_h * (guide_h - H / prior_denom) + noise_amp_h * noise_h[k]
        if not (np.isfinite(Xd).all() and np.isfinite(H).all()):
            return k
    return -1


if HAS_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _posterior_mean_nb(x, points, sigma):
        out = np.empty_like(x)
        n_pts = points.shape[0]
        inv = 1.0 / (2.0 * sigma * sigma)
        for i in range(x.shape[0]):
            for j in range(x.shape[1]):
                z = x[i, j]
                best = -np.inf
                for p in range(n_pts):
                    dr = z.real - points[p].real
                    di = z.imag - points[p].imag
                    t = -(dr * dr + di * di) * inv
                    if t > best:
                        best = t
                num = 0.0 + 0.0j
                den = 0.0
                for p in range(n_pts):
                    dr = z.real - points[p].real
                    di = z.imag - points[p].imag
                    w = np.exp(-(dr * dr + di * di) * inv - best)
                    num += points[p] * w
                    den += w
                out[i, j] = num / den
        return out

    @njit(cache=True)
    def _level_sweep_core_nb(
        Y, X_full, Xd, H, n_pilots, points,
        sigma_x, sigma_h, sigma0, eps_x, eps_h, noise_amp_x, noise_amp_h,
        prior_var, noise_x, noise_h, update_h,
    ):
        n_steps = noise_x.shape[0]
        n_rx = H.shape[0]
        n_users = H.shape[1]
        n_data = Xd.shape[1]
        s0sq = sigma0 * sigma0
        denom_h = s0sq + sigma_h * sigma_h
        prior_denom = prior_var + sigma_h * sigma_h
        sxsq = sigma_x * sigma_x
        for k in range(n_steps):
            if n_data > 0:
                Hh = np.conj(H).T
                A = sxsq * np.dot(Hh, H)
                for i in range(n_users):
                    A[i, i] += s0sq
                resid_d = Y[:, n_pilots:] - np.dot(H, Xd)
                guide_x = np.linalg.solve(np.ascontiguousarray(A), np.dot(Hh, np.ascontiguousarray(resid_d)))
                mean_x = _posterior_mean_nb(Xd, points, sigma_x)
                for i in range(n_users):
                    for j in range(n_data):
                        step = guide_x[i, j] + (mean_x[i, j] - Xd[i, j]) / sxsq
                        Xd[i, j] += eps_x * step + noise_amp_x * noise_x[k, i, j]
                        X_full[i, n_pilots + j] = Xd[i, j]
            if update_h:
                resid = Y - np.dot(H, X_full)
                guide_h = np.dot(resid, np.conj(X_full).T) / denom_h
                for i in range(n_rx):
                    for j in range(n_users):
                        H[i, j] += (
                            eps_h * (guide_h[i, j] - H[i, j] / prior_denom)
                            + noise_amp_h * noise_h[k, i, j]
                        )
            bad = False
            for i in range(n_users):
                for j in range(n_data):
                    v = Xd[i, j]
                    if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                        bad = True
            for i in range(n_rx):
                for j in range(n_users):
                    v = H[i, j]
                    if not (np.isfinite(v.real) and np.isfinite(v.imag)):
                        bad = True
            if bad:
                return k
        return -1

else:  # pragma: no cover - exercised only where numba is absent
    _posterior_mean_nb = None
    _level_sweep_core_nb = None


def posterior_mean(x: np.ndarray, points: np.ndarray, sigma: float, backend: str | None = None) -> np.ndarray:
    """Dispatching wrapper over the two posterior-mean kernels (2-D input)."""
    if _use_numba(backend):
        return _posterior_mean_nb(np.ascontiguousarray(x), points, sigma)
    return posterior_mean_numpy(x, points, sigma)


def level_sweep(*args, backend: str | None = None):
    """Dispatching wrapper over the two level-sweep kernels."""
    if _use_numba(backend):
        return _level_sweep_core_nb(*args)
    return _level_sweep_core_numpy(*args)


def _use_numba(backend: str | None) -> bool:
    if backend is None:
        return USE_NUMBA
    if backend == "numba":
        if not HAS_NUMBA:
            raise ImportError("numba backend requested but numba is not importable")
        return True
    if backend == "numpy":
        return False
    raise ValueError(f"backend must be numba|numpy|None, got {backend!r}")


def warmup():
    """Pre-compile the jitted kernels (cheap no-op on the numpy backend)."""
    if not (HAS_NUMBA and USE_NUMBA):
        return
    pts = np.array([1 + 1j, -1 + 1j, 1 - 1j, -1 - 1j]) / np.sqrt(2)
    Y = np.zeros((2, 2), dtype=np.complex128)
    X_full = np.zeros((1, 2), dtype=np.complex128)
    Xd = np.zeros((1, 1), dtype=np.complex128)
    H = np.zeros((2, 1), dtype=np.complex128)
    nz = np.zeros((1, 1, 1), dtype=np.complex128)
    nh = np.zeros((1, 2, 1), dtype=np.complex128)
    _level_sweep_core_nb(Y, X_full, Xd, H, 1, pts, 0.5, 0.5, 0.1, 1e-3, 1e-3, 0.0, 0.0, 1.0, nz, nh, True)
