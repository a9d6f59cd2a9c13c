"""Kernel backend selection.

The hot numeric kernels ship in two flavors: numba ``@njit`` and pure
numpy. ``JEDMIMO_BACKEND`` picks the default used by the sampler:

* ``auto`` (default) -- numba when importable, numpy otherwise
* ``numba``          -- require the jitted kernels, fail if unavailable
* ``numpy``          -- force the pure-numpy fallback

Both flavors stay importable regardless of the flag so they can be
compared directly (see benchmarks/bench_backends.py).
"""

import os
import warnings

ENV_VAR = "JEDMIMO_BACKEND"

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:
    HAS_NUMBA = False


def _resolve() -> bool:
    choice = os.environ.get(ENV_VAR, "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"{ENV_VAR} must be auto|numba|numpy, got {choice!r}")
    if choice == "numpy":
        return False
    if HAS_NUMBA:
        return True
    if choice == "numba":
        raise ImportError(f"{ENV_VAR}=numba but numba is not importable")
    warnings.warn("numba unavailable; falling back to numpy kernels", RuntimeWarning)
    return False


USE_NUMBA = _resolve()


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
