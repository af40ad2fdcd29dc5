"""Optional numba acceleration.

Set ``MIMO_NOMA_DISABLE_NUMBA=1`` to force the pure-numpy kernels (also used
automatically when numba is not importable).
"""
from __future__ import annotations

import os

_disabled = os.environ.get("MIMO_NOMA_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - depends on environment
    numba = None
    HAVE_NUMBA = False


def njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True, fastmath=True, error_model="numpy")(fn)
    return fn
