"""Kernel backend selection.

Hot per-pixel kernels ship in two versions: a numba @njit loop and a
vectorized pure-numpy twin.  The numba path is the default; setting the
environment variable MVSGEO_NO_NUMBA to a non-empty value other than "0"
(or not having numba installed) selects the numpy path.  The choice is
made once at import time.
"""

import os

__all__ = ["USING_NUMBA", "njit"]


def _numba_requested() -> bool:
    flag = os.environ.get("MVSGEO_NO_NUMBA", "").strip()
    return flag in ("", "0")


USING_NUMBA = False
if _numba_requested():
    try:
        from numba import njit  # noqa: F401

        USING_NUMBA = True
    except ImportError:
        pass

if not USING_NUMBA:

    def njit(*args, **kwargs):
        """No-op stand-in so @njit-decorated functions stay plain Python."""

        def decorator(func):
            return func

        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return decorator
