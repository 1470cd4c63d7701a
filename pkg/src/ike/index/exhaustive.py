from __future__ import annotations

import warnings

import numpy as np

from ..codec import PackedCodes, scan
from ..core import EncodingError, ParameterError
from ._common import SearchResult, padded, topk


def _queries(codes: PackedCodes, query) -> np.ndarray:
    if isinstance(query, PackedCodes):
        if not codes.compatible(query):
            raise EncodingError(
                f"query codes (t={query.t}, n_b={query.n_b}) do not match "
                f"database codes (t={codes.t}, n_b={codes.n_b})"
            )
        return query.data
    q = np.asarray(query, dtype=np.uint64)
    return q.reshape(-1, codes.words_per_point)


def clamp_k(k: int, n: int) -> int:
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if k > n:
        warnings.warn(f"k={k} exceeds the database size {n}; clamped", stacklevel=3)
        return n
    return k


def exhaustive_topk(codes: PackedCodes, query, k: int = 10) -> SearchResult:
    """Scan every database code and keep the ``k`` best match counts per query."""
    k = clamp_k(k, codes.n)
    rows = []
    for q in _queries(codes, query):
        ids, scores = topk(scan(codes, q), k)
        rows.append(padded(ids, scores, k))
    return SearchResult.stack(rows)
