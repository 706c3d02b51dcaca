"""Backend switch between numba-compiled kernels and plain numpy.

Set ``LPM_DISABLE_NUMBA=1`` (or ``LPM_BACKEND=numpy``) in the environment
before importing :mod:`lpm` to force the numpy code paths.  When numba is not
installed the numpy paths are used automatically.
"""

import os

_TRUE = {"1", "true", "yes", "on"}


def _env_disabled():
    if os.environ.get("LPM_DISABLE_NUMBA", "").strip().lower() in _TRUE:
        return True
    return os.environ.get("LPM_BACKEND", "").strip().lower() == "numpy"


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(func):
    """Compile ``func`` in nopython mode, or return None without numba."""
    if not HAVE_NUMBA:
        return None
    return numba.jit(nopython=True, cache=True, nogil=True)(func)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"


def set_backend(name):
    """Switch backends at runtime (``"numba"`` or ``"numpy"``).

    Used by the backend benchmark; library code reads :data:`USE_NUMBA` at
    call time so the switch takes effect immediately.
    """
    global USE_NUMBA
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    USE_NUMBA = name == "numba"
