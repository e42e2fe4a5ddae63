"""numba switch.

Hot raster kernels exist twice: a loop version compiled with ``njit`` and a
vectorized numpy version.  ``USE_NUMBA`` selects which one the public dispatch
functions call.  Set ``CHARTTABLE_DISABLE_NUMBA=1`` to force the numpy path.
"""

import os

DISABLE_ENV = "CHARTTABLE_DISABLE_NUMBA"

try:
    from numba import njit as _numba_njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def _env_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = HAVE_NUMBA and not _env_disabled()


def njit(*args, **kwargs):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _numba_njit(*args, **kwargs)
