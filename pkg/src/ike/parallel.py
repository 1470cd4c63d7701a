"""Thread-count control shared by the numba kernels and BLAS."""

from __future__ import annotations

import os

import numba
from threadpoolctl import threadpool_limits

_threads: int | None = None


def max_threads() -> int:
    return numba.config.NUMBA_NUM_THREADS


def get_threads() -> int:
    """Active worker count: explicit setting, else ``IKE_THREADS``, else all available."""
    if _threads is not None:
        return _threads
    env = os.environ.get("IKE_THREADS")
    if env:
        return max(1, min(int(env), max_threads()))
    return max_threads()


def set_threads(n: int | None) -> int:
    """Fix the worker count for numba kernels and BLAS; ``None`` restores the default."""
    global _threads
    _threads = None if n is None else max(1, min(int(n), max_threads()))
    k = get_threads()
    numba.set_num_threads(k)
    threadpool_limits(k)
    return k
