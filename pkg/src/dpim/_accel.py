"""Optional numba acceleration.

Set ``DPIM_DISABLE_NUMBA=1`` to force the pure numpy/Python kernels even
when numba is importable. The flag is read once, at import time.
"""

import os

DISABLED = os.environ.get("DPIM_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from numba import njit as _njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is an optional extra
    _njit = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and not DISABLED


def njit(fn):
    """``numba.njit(cache=True)`` when numba is installed, identity otherwise."""
    if _njit is None:
        return fn
    return _njit(cache=True)(fn)
