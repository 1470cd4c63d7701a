"""Timing harness: paired bitwise vs float scans and end-to-end search timing."""

from __future__ import annotations

import statistics
import time

import numba
import numpy as np
from threadpoolctl import threadpool_limits

from . import _kernels
from .codec import PackedCodes, pack
from .eval import machine_info
from .index import exhaustive_topk, hnsw_search, ivf_search
from .index._common import topk

__all__ = ["float_scan", "bit_scan", "paired_scan", "time_search"]


def float_scan(X: np.ndarray, q: np.ndarray, k: int = 10):
    """Baseline: f32 inner products through BLAS, then the same top-k selection."""
    return topk(X @ q, k)


def bit_scan(codes: PackedCodes, q: np.ndarray, k: int = 10):
    return topk(_kernels.scan(codes.data, q, codes.n_b, codes.seg_mask, codes.tail_mask), k)


def _timed(fn, runs: int, warmup: int) -> list[float]:
    for _ in range(warmup):
        fn()
    out = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        out.append(time.perf_counter() - t0)
    return out


def paired_scan(n: int = 100_000, d: int = 1024, t: int | None = None, queries: int = 20,
                runs: int = 10, warmup: int = 1, k: int = 10, seed: int = 0) -> dict:
    """Single-thread exhaustive scan: ``t``-bit codes (n_b=1) against ``d``-dim f32 vectors.

    Both sides scan the same number of points for the same queries and use
    the same top-k routine; only the similarity computation differs.
    """
    t = d if t is None else t
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d), dtype=np.float32)
    Q = rng.standard_normal((queries, d), dtype=np.float32)
    codes = pack(rng.integers(0, 2, size=(n, t), dtype=np.uint8), 1)
    QC = pack(rng.integers(0, 2, size=(queries, t), dtype=np.uint8), 1).data
    prev = numba.get_num_threads()
    numba.set_num_threads(1)
    try:
        with threadpool_limits(1):
            bits = _timed(lambda: [bit_scan(codes, q, k) for q in QC], runs, warmup)
            flts = _timed(lambda: [float_scan(X, q, k) for q in Q], runs, warmup)
    finally:
        numba.set_num_threads(prev)
    bit_s = statistics.mean(bits)
    flt_s = statistics.mean(flts)
    return {
        "bench": "paired_scan",
        "n": n,
        "d": d,
        "t": t,
        "n_b": 1,
        "queries": queries,
        "runs": runs,
        "warmup": warmup,
        "threads": 1,
        "bitwise_s": bit_s,
        "float_s": flt_s,
        "bitwise_qps": queries / bit_s,
        "float_qps": queries / flt_s,
        "speedup": flt_s / bit_s,
        "bitwise_bytes_per_point": codes.bytes_per_point,
        "float_bytes_per_point": 4 * d,
        "machine": machine_info(),
    }


def time_search(model, codes: PackedCodes, queries: np.ndarray, strategy: str = "exhaustive",
                index=None, k: int = 10, ef_search: int = 64, nprobe: int = 1,
                runs: int = 10, warmup: int = 1) -> dict:
    """Query mapping time and similarity/search time, separately and summed, averaged over runs."""
    Q = np.ascontiguousarray(queries, dtype=np.float32)

    def search(qc):
        if strategy == "exhaustive":
            return exhaustive_topk(codes, qc, k)
        if strategy == "hnsw":
            return hnsw_search(index, qc, k, ef_search)
        if strategy == "ivf":
            return ivf_search(index, Q, qc, k, nprobe)
        raise ValueError(f"unknown strategy {strategy!r}")

    qc = model.encode(Q).data
    search(qc)
    for _ in range(warmup):
        search(model.encode(Q).data)
    map_t, search_t = [], []
    for _ in range(runs):
        t0 = time.perf_counter()
        qc = model.encode(Q).data
        t1 = time.perf_counter()
        search(qc)
        t2 = time.perf_counter()
        map_t.append(t1 - t0)
        search_t.append(t2 - t1)
    total = [a + b for a, b in zip(map_t, search_t)]
    nq = Q.shape[0]
    return {
        "bench": "search",
        "strategy": strategy,
        "n": codes.n,
        "t": codes.t,
        "n_b": codes.n_b,
        "queries": nq,
        "k": k,
        "runs": runs,
        "warmup": warmup,
        "threads": numba.get_num_threads(),
        "mapping_s": statistics.mean(map_t),
        "search_s": statistics.mean(search_t),
        "total_s": statistics.mean(total),
        "total_s_std": statistics.pstdev(total),
        "qps": nq / statistics.mean(total),
        "latency_ms_per_query": 1e3 * statistics.mean(total) / nq,
        "machine": machine_info(),
    }
