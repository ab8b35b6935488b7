"""Optional numba acceleration.

Set ``HOTLANE_DISABLE_NUMBA=1`` to run every kernel as plain Python/numpy.
The kernels are written so that both paths execute the same source.
"""
import os

_DISABLED = os.environ.get("HOTLANE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by HOTLANE_DISABLE_NUMBA")
    from numba import njit as _njit

    NUMBA_ENABLED = True
except ImportError:
    _njit = None
    NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise."""
    if NUMBA_ENABLED:
        return _njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda fn: fn
