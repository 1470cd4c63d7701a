from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SearchResult:
    """Ranked hits for a batch of queries.

    ``ids`` and ``scores`` are ``q x k``; scores are match counts, rows are
    ordered by descending score then ascending id.  Rows with fewer than ``k``
    hits are padded with id ``-1`` and score ``-1``.
    """

    ids: np.ndarray
    scores: np.ndarray

    def __len__(self) -> int:
        return self.ids.shape[0]

    def hits(self, q: int = 0) -> list[tuple[int, int]]:
        keep = self.ids[q] >= 0
        return list(zip(self.ids[q][keep].tolist(), self.scores[q][keep].tolist()))

    @staticmethod
    def stack(results: list["SearchResult"]) -> "SearchResult":
        k = max((r.ids.shape[1] for r in results), default=0)
        ids = np.full((len(results), k), -1, dtype=np.int64)
        scores = np.full((len(results), k), -1, dtype=np.int32)
        for i, r in enumerate(results):
            w = r.ids.shape[1]
            ids[i, :w] = r.ids[0]
            scores[i, :w] = r.scores[0]
        return SearchResult(ids, scores)


def topk(scores: np.ndarray, k: int, ids: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Top ``k`` entries by score (descending), ties to the lower id.

    ``ids`` defaults to ``arange(len(scores))``; returns ``(ids, scores)`` of
    length ``min(k, len(scores))``.
    """
    scores = np.asarray(scores, dtype=np.int64)
    if ids is None:
        ids = np.arange(scores.shape[0], dtype=np.int64)
    else:
        ids = np.asarray(ids, dtype=np.int64)
    n = scores.shape[0]
    k = min(k, n)
    if k <= 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int32)
    top = int(scores.max())
    key = (top - scores) * (int(ids.max()) + 1) + ids
    if k < n:
        part = np.argpartition(key, k - 1)[:k]
    else:
        part = np.arange(n)
    order = part[np.argsort(key[part], kind="stable")]
    return ids[order], scores[order].astype(np.int32)


def padded(ids: np.ndarray, scores: np.ndarray, k: int) -> SearchResult:
    out_ids = np.full((1, k), -1, dtype=np.int64)
    out_scores = np.full((1, k), -1, dtype=np.int32)
    out_ids[0, : ids.shape[0]] = ids
    out_scores[0, : scores.shape[0]] = scores
    return SearchResult(out_ids, out_scores)
