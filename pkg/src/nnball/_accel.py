"""Backend selection for the hot kernels.

Set ``NNBALL_DISABLE_NUMBA=1`` (or have numba missing) to run the pure-numpy
path.  The flag is read once at import time.
"""
import os

_FLAG = os.environ.get("NNBALL_DISABLE_NUMBA", "").strip().lower()

try:
    if _FLAG in ("1", "true", "yes", "on"):
        raise ImportError("numba disabled by NNBALL_DISABLE_NUMBA")
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache`` and ``nogil`` on; identity when disabled."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if len(args) == 1 and callable(args[0]):
        return _njit(**kwargs)(args[0])
    return _njit(*args, **kwargs)


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
