"""Numba switch.

Set ``REUSE_DISABLE_NUMBA=1`` before import to run every kernel through its
pure-numpy fallback. When numba is missing the fallback is used automatically.
"""

import os

_disabled = os.environ.get("REUSE_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    if _disabled:
        raise ImportError
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:
    _njit = None
    HAS_NUMBA = False


def njit(fn):
    """Compile ``fn`` in nopython mode when numba is active, else return it unchanged."""
    if HAS_NUMBA:
        return _njit(cache=True, nogil=True)(fn)
    return fn
