"""Backend switch for the numeric kernels.

Kernels are plain numpy-compatible Python.  By default they are compiled with
``numba.njit``; setting ``BIFURCURVE_DISABLE_NUMBA=1`` (or running without
numba installed) keeps the interpreted numpy path.
"""
from __future__ import annotations

import os

_DISABLED = os.environ.get("BIFURCURVE_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError
    import numba as _nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _nb = None
    HAVE_NUMBA = False


def backend() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def njit(func):
    """``numba.njit(cache=True)`` when available, otherwise the identity."""
    if HAVE_NUMBA:
        return _nb.njit(cache=True, nogil=True)(func)
    return func
