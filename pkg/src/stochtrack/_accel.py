"""Numba switch shared by the kernel modules.

Set ``STOCHTRACK_NUMBA=0`` before import to force the pure-numpy paths.
"""

import os

_FLAG = os.environ.get("STOCHTRACK_NUMBA", "1").strip().lower()

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _njit = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and _FLAG not in ("0", "false", "no", "off")


def njit(func):
    """Compile ``func`` with numba (cached); a no-op when numba is unavailable."""
    if _njit is None:
        return func
    return _njit(cache=True)(func)


def pick(fast, slow):
    """Return the numba kernel when enabled, otherwise the numpy fallback."""
    return fast if USE_NUMBA else slow
