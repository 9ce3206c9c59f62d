"""Backend selection for the hot kernels.

Numba is used when it is importable and ``COVERTFBL_DISABLE_NUMBA`` is not
set to a truthy value. Both backends compute the same quantities; the numpy
path exists for environments without numba and as a cross-check.
"""
import os

_FLAG = "COVERTFBL_DISABLE_NUMBA"


def _disabled_by_env():
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


try:  # pragma: no cover - exercised implicitly by import
    import numba as _numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not _disabled_by_env()


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when available, otherwise a no-op decorator."""
    bare = len(args) == 1 and callable(args[0]) and not kwargs
    if not HAVE_NUMBA:
        return args[0] if bare else (lambda fn: fn)
    kwargs.setdefault("cache", True)
    if bare:
        return _numba.njit(cache=True)(args[0])
    return _numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
