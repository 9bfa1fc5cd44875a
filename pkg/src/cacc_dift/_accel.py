"""Optional numba acceleration.

Set ``CACC_DIFT_DISABLE_NUMBA=1`` to force the pure-numpy code paths (useful
for debugging and for checking that both paths agree).
"""

import os

_DISABLED = os.environ.get("CACC_DIFT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:
    _njit = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity decorator otherwise."""
    if HAVE_NUMBA:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
