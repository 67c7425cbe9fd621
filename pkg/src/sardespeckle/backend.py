"""Numba/numpy backend selection for the hot kernels.

Set ``SARDESPECKLE_NUMBA=0`` in the environment to force the pure-numpy
fallback path (useful on platforms without numba, and for benchmarking;
see benchmarks/bench_backends.py).
"""
from __future__ import annotations

import os


def _numba_requested() -> bool:
    flag = os.environ.get("SARDESPECKLE_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


NUMBA_ENABLED = False
if _numba_requested():
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def njit_or_none(func):
    """Return an njit-compiled version of func, or None when numba is off."""
    if not NUMBA_ENABLED:
        return None
    from numba import njit

    return njit(cache=True)(func)
