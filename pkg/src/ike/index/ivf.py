"""Inverted-file index: k-means cells in float space, candidates ranked by match count.

Only the ``nlist x d`` float32 centroids and the inverted lists are kept; the
float corpus itself is not stored.

File layout (little-endian)::

    magic "IKEV" | nlist u32 | d u32 | n u32
    centroids   nlist x d f32
    offsets     (nlist + 1) u64
    ids         n u32
"""

from __future__ import annotations

import math
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .. import _kernels
from ..codec import PackedCodes
from ..core import FormatError, ParameterError, as_embeddings, stream, subsample
from ._common import SearchResult, padded, topk
from .exhaustive import _queries, clamp_k

__all__ = ["IvfIndex", "kmeans", "assign", "nearest_centroid", "default_nlist", "ivf_build", "ivf_search",
           "save_ivf", "load_ivf"]

_PURPOSE = 4
_HEADER = struct.Struct("<4sIII")


def default_nlist(n: int) -> int:
    """Roughly ``4 * sqrt(n)`` rounded to a power of two (4096 at a million points)."""
    if n < 4:
        return 1
    return min(n, 2 ** round(math.log2(4 * math.sqrt(n))))


def nearest_centroid(X, centroids: np.ndarray) -> np.ndarray:
    """Exact nearest float32 centroid per row (direct float64 differences, lowest index on ties)."""
    X = np.ascontiguousarray(X, dtype=np.float32)
    C = np.ascontiguousarray(centroids, dtype=np.float32)
    out = np.empty((X.shape[0], 1), dtype=np.int64)
    dims = np.arange(C.shape[1], dtype=np.int32)[None, :]
    _kernels.nearest_anchor(X, dims, C[None], out)
    return out[:, 0]


def assign(X: np.ndarray, centroids: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Nearest centroid through the BLAS expansion; used inside the Lloyd iterations."""
    C = centroids.astype(np.float64)
    cc = (C * C).sum(1)
    out = np.empty(X.shape[0], dtype=np.int64)
    for s in range(0, X.shape[0], chunk):
        x = np.asarray(X[s : s + chunk], dtype=np.float64)
        d2 = cc[None, :] - 2.0 * (x @ C.T)
        out[s : s + chunk] = d2.argmin(1)
    return out


def _split_empty(C: np.ndarray, counts: np.ndarray, rng: np.random.Generator) -> None:
    # give each empty cell half of the largest cell by nudging its centroid apart
    for j in np.flatnonzero(counts == 0):
        big = int(np.argmax(counts))
        eps = 1e-4 * (np.abs(C[big]) + 1e-6) * rng.choice([-1.0, 1.0], size=C.shape[1])
        C[j] = C[big] + eps
        C[big] = C[big] - eps
        counts[j] = counts[big] // 2
        counts[big] -= counts[j]


def kmeans(X, nlist: int, iters: int = 25, seed: int = 0) -> np.ndarray:
    """Lloyd iterations from ``nlist`` distinct random rows; returns float32 centroids."""
    X = np.asarray(X, dtype=np.float32)
    n = X.shape[0]
    if not 1 <= nlist <= n:
        raise ParameterError(f"nlist must be in [1, n={n}], got {nlist}")
    rng = stream(seed, 0, _PURPOSE)
    C = X[np.sort(subsample(n, nlist, rng))].astype(np.float64)
    for _ in range(iters):
        labels = assign(X, C)
        order = np.argsort(labels, kind="stable")
        counts = np.bincount(labels, minlength=nlist)
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        nonempty = counts > 0
        sums = np.add.reduceat(X[order].astype(np.float64), starts[nonempty], axis=0)
        C[nonempty] = sums / counts[nonempty, None]
        if not nonempty.all():
            _split_empty(C, counts, rng)
    return C.astype(np.float32)


@dataclass
class IvfIndex:
    centroids: np.ndarray  # nlist x d float32
    offsets: np.ndarray  # nlist + 1
    ids: np.ndarray  # n, grouped by list, ascending inside each list
    codes: PackedCodes

    @property
    def nlist(self) -> int:
        return self.centroids.shape[0]

    @property
    def d(self) -> int:
        return self.centroids.shape[1]

    def list_ids(self, j: int) -> np.ndarray:
        return self.ids[self.offsets[j] : self.offsets[j + 1]]

    def probe(self, query_float: np.ndarray, nprobe: int) -> np.ndarray:
        """The ``nprobe`` nearest cells to a float query, nearest first."""
        q = np.asarray(query_float, dtype=np.float32).reshape(-1)
        if q.shape[0] != self.d:
            raise ParameterError(f"dimension mismatch: index expects d={self.d}, got {q.shape[0]}")
        d2 = _kernels.sq_dists(q.astype(np.float32), self.centroids)
        return np.argsort(d2, kind="stable")[:nprobe]


def _lists(labels: np.ndarray, nlist: int):
    order = np.argsort(labels, kind="stable")
    counts = np.bincount(labels, minlength=nlist)
    offsets = np.zeros(nlist + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(counts)
    return offsets, order.astype(np.int64)


def ivf_build(float_data, codes: PackedCodes, nlist: int | None = None,
              kmeans_iters: int = 25, seed: int = 0) -> IvfIndex:
    X = as_embeddings(float_data)
    if X.shape[0] != codes.n:
        raise ParameterError(f"float data has {X.shape[0]} rows but codes have {codes.n}")
    nlist = default_nlist(X.shape[0]) if nlist is None else int(nlist)
    if nlist > X.shape[0]:
        raise ParameterError(f"nlist={nlist} exceeds the number of points n={X.shape[0]}")
    C = kmeans(X, nlist, kmeans_iters, seed)
    offsets, ids = _lists(nearest_centroid(X, C), nlist)
    return IvfIndex(C, offsets, ids, codes)


def ivf_search(index: IvfIndex, query_float, query_code, k: int = 10, nprobe: int = 1) -> SearchResult:
    """Probe the nearest cells in float space, rank their members by match count."""
    if nprobe > index.nlist:
        warnings.warn(f"nprobe={nprobe} exceeds nlist={index.nlist}; clamped", stacklevel=2)
        nprobe = index.nlist
    if nprobe < 1:
        raise ParameterError("nprobe must be >= 1")
    k = clamp_k(k, index.codes.n)
    qf = np.asarray(query_float, dtype=np.float32)
    if qf.ndim == 1:
        qf = qf[None, :]
    qc = _queries(index.codes, query_code)
    if qf.shape[0] != qc.shape[0]:
        raise ParameterError("float and code query counts differ")
    c = index.codes
    rows = []
    for x, q in zip(qf, qc):
        cells = index.probe(x, nprobe)
        cand = np.concatenate([index.list_ids(j) for j in cells])
        if cand.shape[0] == 0:
            rows.append(padded(np.empty(0, np.int64), np.empty(0, np.int32), k))
            continue
        scores = _kernels.scan_subset(c.data, cand, np.ascontiguousarray(q), c.n_b, c.seg_mask, c.tail_mask)
        ids, sc = topk(scores, k, cand)
        rows.append(padded(ids, sc, k))
    return SearchResult.stack(rows)


def save_ivf(path, index: IvfIndex) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"IKEV", index.nlist, index.d, index.ids.shape[0]))
        fh.write(index.centroids.astype("<f4").tobytes())
        fh.write(index.offsets.astype("<u8").tobytes())
        fh.write(index.ids.astype("<u4").tobytes())


def load_ivf(path, codes: PackedCodes) -> IvfIndex:
    raw = open(path, "rb").read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated IVF header")
    magic, nlist, d, n = _HEADER.unpack_from(raw)
    if magic != b"IKEV":
        raise FormatError(f"{path}: bad magic {magic!r}, expected b'IKEV'")
    expected = _HEADER.size + 4 * nlist * d + 8 * (nlist + 1) + 4 * n
    if len(raw) != expected:
        raise FormatError(f"{path}: size {len(raw)} does not match header (expected {expected})")
    if n != codes.n:
        raise FormatError(f"{path}: index covers {n} points, codes have {codes.n}")
    off = _HEADER.size
    C = np.frombuffer(raw, "<f4", nlist * d, off).reshape(nlist, d).astype(np.float32)
    off += 4 * nlist * d
    offsets = np.frombuffer(raw, "<u8", nlist + 1, off).astype(np.int64)
    off += 8 * (nlist + 1)
    ids = np.frombuffer(raw, "<u4", n, off).astype(np.int64)
    return IvfIndex(C, offsets, ids, codes)
