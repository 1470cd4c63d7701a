"""Retrieval effectiveness metrics, TREC file IO and throughput measurement.

Text formats (UTF-8, one record per line, whitespace separated):

* qrels: ``qid iteration docid grade``
* run:   ``qid Q0 docid rank score tag``

Runs are always re-ranked by descending score with ties broken by ascending
doc id before scoring; unjudged documents count as grade 0.
"""

from __future__ import annotations

import logging
import math
import os
import platform
import statistics
import time
import warnings
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .core import EvaluationError, FormatError

logger = logging.getLogger(__name__)

Qrels = dict[str, dict[str, int]]
Run = dict[str, list[tuple[str, float]]]

__all__ = [
    "Qrels", "Run", "read_qrels", "write_qrels", "read_run", "write_run", "ranked",
    "mrr_at_k", "ndcg_at_k", "recall_overlap", "measure_qps", "run_from_result",
]


def read_qrels(path) -> Qrels:
    qrels: Qrels = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 'qid iteration docid grade', got {line.rstrip()!r}")
            qid, _, docid, grade = parts
            try:
                g = int(grade)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: grade {grade!r} is not an integer") from None
            if g < 0:
                raise FormatError(f"{path}:{lineno}: negative grade {g}")
            qrels.setdefault(qid, {})[docid] = g
    return qrels


def write_qrels(path, qrels: Qrels) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid, docs in qrels.items():
            for docid, g in docs.items():
                fh.write(f"{qid} 0 {docid} {g}\n")


def read_run(path) -> Run:
    run: Run = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise FormatError(f"{path}:{lineno}: expected 'qid Q0 docid rank score tag', got {line.rstrip()!r}")
            try:
                score = float(parts[4])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: score {parts[4]!r} is not a number") from None
            run.setdefault(parts[0], []).append((parts[2], score))
    return run


def ranked(docs: Sequence[tuple[str, float]]) -> list[tuple[str, float]]:
    """Descending score, ascending doc id on ties."""
    return sorted(docs, key=lambda ds: (-ds[1], ds[0]))


def write_run(path, run: Run, tag: str = "ike") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid, docs in run.items():
            for rank, (docid, score) in enumerate(ranked(docs), 1):
                s = int(score) if float(score).is_integer() else score
                fh.write(f"{qid} Q0 {docid} {rank} {s} {tag}\n")


def run_from_result(result, query_ids: Sequence[str] | None = None,
                    doc_ids: Sequence[str] | None = None) -> Run:
    """Convert a :class:`~ike.index.SearchResult` into a run keyed by string ids."""
    run: Run = {}
    for q in range(result.ids.shape[0]):
        qid = str(q) if query_ids is None else query_ids[q]
        hits = []
        for i, s in zip(result.ids[q].tolist(), result.scores[q].tolist()):
            if i < 0:
                continue
            hits.append((str(i) if doc_ids is None else doc_ids[i], float(s)))
        run[qid] = hits
    return run


def _judged_queries(run: Mapping, qrels: Qrels) -> list[str]:
    missing = [q for q in run if q not in qrels]
    if missing:
        warnings.warn(f"{len(missing)} run queries have no judgments and are skipped", stacklevel=3)
    common = [q for q in run if q in qrels]
    if not common:
        raise EvaluationError("no query appears in both the run and the judgments")
    return common


def mrr_at_k(run: Run, qrels: Qrels, k: int = 10, min_grade: int = 1) -> float:
    """Mean reciprocal rank of the first document with grade >= ``min_grade`` in the top ``k``."""
    total = 0.0
    queries = _judged_queries(run, qrels)
    for qid in queries:
        judged = qrels[qid]
        for rank, (doc, _) in enumerate(ranked(run[qid])[:k], 1):
            if judged.get(doc, 0) >= min_grade:
                total += 1.0 / rank
                break
    return total / len(queries)


def _dcg(grades: Sequence[int]) -> float:
    return sum((2.0 ** g - 1.0) / math.log2(i + 2) for i, g in enumerate(grades))


def ndcg_at_k(run: Run, qrels: Qrels, k: int = 10) -> float:
    """Mean nDCG@k with gain ``2**grade - 1`` and discount ``log2(rank + 1)``."""
    total = 0.0
    queries = _judged_queries(run, qrels)
    for qid in queries:
        judged = qrels[qid]
        ideal = _dcg(sorted(judged.values(), reverse=True)[:k])
        if ideal <= 0:
            continue
        got = _dcg([judged.get(doc, 0) for doc, _ in ranked(run[qid])[:k]])
        total += got / ideal
    return total / len(queries)


def recall_overlap(run, truth, k: int = 10) -> float:
    """Mean ``|top-k(run) & top-k(truth)| / k``; accepts runs or ``q x >=k`` id arrays."""
    if isinstance(run, Mapping) or isinstance(truth, Mapping):
        if not (isinstance(run, Mapping) and isinstance(truth, Mapping)):
            raise EvaluationError("run and truth must both be runs or both be id arrays")
        if set(run) != set(truth):
            raise EvaluationError("run and truth cover different queries")
        vals = [
            len({d for d, _ in ranked(run[q])[:k]} & {d for d, _ in ranked(truth[q])[:k]}) / k
            for q in truth
        ]
    else:
        a = np.asarray(run)
        b = np.asarray(truth)
        if a.shape[0] != b.shape[0]:
            raise EvaluationError(f"run has {a.shape[0]} queries, truth has {b.shape[0]}")
        vals = [len(set(x[:k].tolist()) & set(y[:k].tolist()) - {-1}) / k for x, y in zip(a, b)]
    if not vals:
        raise EvaluationError("no queries to compare")
    return float(np.mean(vals))


def machine_info() -> dict:
    return {
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "python": platform.python_version(),
        "cpu_count": os.cpu_count(),
    }


def measure_qps(search: Callable, queries: Sequence, warmup: int = 1, runs: int = 10,
                threads: int = 1) -> dict:
    """Time ``search(q)`` over every query, ``runs`` times after ``warmup`` passes.

    QPS is the mean over runs of ``len(queries) / wall time``; latencies are
    per call, pooled across runs.
    """
    if len(queries) < 1:
        raise EvaluationError("need at least one query to time")
    lat: list[float] = []

    def timed(q):
        t0 = time.perf_counter()
        search(q)
        return time.perf_counter() - t0

    def one_pass(pool):
        t0 = time.perf_counter()
        if pool is None:
            per = [timed(q) for q in queries]
        else:
            per = list(pool.map(timed, queries))
        return time.perf_counter() - t0, per

    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for _ in range(warmup):
            one_pass(pool)
        qps = []
        for _ in range(runs):
            wall, per = one_pass(pool)
            qps.append(len(queries) / wall if wall > 0 else math.inf)
            lat.extend(per)
    finally:
        if pool is not None:
            pool.shutdown()
    lat_ms = np.asarray(lat) * 1e3
    return {
        "qps": float(np.mean(qps)),
        "qps_std": float(statistics.pstdev(qps)) if len(qps) > 1 else 0.0,
        "qps_runs": [float(x) for x in qps],
        "latency_ms_mean": float(lat_ms.mean()),
        "latency_ms_p50": float(np.percentile(lat_ms, 50)),
        "latency_ms_p95": float(np.percentile(lat_ms, 95)),
        "queries": len(queries),
        "runs": runs,
        "warmup": warmup,
        "threads": threads,
    }
