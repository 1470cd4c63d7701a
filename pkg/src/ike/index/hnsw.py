"""HNSW graph over packed codes with distance ``t - match_count``.

Construction follows the usual layered scheme: geometric level draws with
normalisation ``1/ln(M)``, greedy descent through the upper layers, a
best-first search with pool ``efConstruction`` per layer, and the
neighbour-selection heuristic for both new links and overflow pruning.  Layer
0 keeps up to ``2M`` links, upper layers ``M``.  Points are inserted in id
order, so the graph is a pure function of the codes, ``M``,
``efConstruction`` and the seed.

Heap entries pack ``(distance, id)`` into one int64 (``distance << 32 | id``),
so every comparison breaks distance ties toward the lower id.

File layout (little-endian)::

    magic "IKEH" | M u32 | efConstruction u32 | n u32 | max_level i32 | entry i32 | t u32 | n_b u8
    levels       n x i32
    layer 0      n x u32 counts, n x 2M i32 links
    upper        for each node with level >= 1, for each layer 1..level: count u32, M i32 links
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numba as nb
import numpy as np

from .. import _kernels
from ..codec import PackedCodes
from ..core import FormatError, ParameterError, stream
from ._common import SearchResult, padded
from .exhaustive import _queries, clamp_k

__all__ = ["HnswIndex", "hnsw_build", "hnsw_search", "save_hnsw", "load_hnsw"]

_PURPOSE = 3
_HEADER = struct.Struct("<4sIIIiiIB")
_SHIFT = np.int64(32)
_LOW = np.int64(0xFFFFFFFF)


# --- heaps on int64 keys ---------------------------------------------------

@nb.njit(inline="always")
def _push(heap, size, key):
    i = size
    heap[i] = key
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        heap[parent], heap[i] = heap[i], heap[parent]
        i = parent
    return size + 1


@nb.njit(inline="always")
def _pop(heap, size):
    top = heap[0]
    size -= 1
    heap[0] = heap[size]
    i = 0
    while True:
        left = 2 * i + 1
        if left >= size:
            break
        child = left
        if left + 1 < size and heap[left + 1] < heap[left]:
            child = left + 1
        if heap[i] <= heap[child]:
            break
        heap[i], heap[child] = heap[child], heap[i]
        i = child
    return top, size


# --- graph access ------------------------------------------------------------

@nb.njit(inline="always")
def _dist(codes, a, q, t, n_b, seg, tail):
    return t - _kernels.match_words(codes[a], q, n_b, seg, tail)


@nb.njit(inline="always")
def _links(node, layer, nbr0, cnt0, slot, up_nbr, up_cnt):
    if layer == 0:
        return nbr0[node], cnt0[node]
    s = slot[node]
    return up_nbr[s, layer - 1], up_cnt[s, layer - 1]


@nb.njit
def _greedy(codes, q, ep, layer, t, n_b, seg, tail, nbr0, cnt0, slot, up_nbr, up_cnt):
    cur = ep
    cur_key = (np.int64(_dist(codes, cur, q, t, n_b, seg, tail)) << _SHIFT) | cur
    changed = True
    while changed:
        changed = False
        links, cnt = _links(cur, layer, nbr0, cnt0, slot, up_nbr, up_cnt)
        for j in range(cnt):
            e = links[j]
            key = (np.int64(_dist(codes, e, q, t, n_b, seg, tail)) << _SHIFT) | e
            if key < cur_key:
                cur_key = key
                cur = e
                changed = True
    return cur


@nb.njit
def _search_layer(codes, q, ep, ef, layer, t, n_b, seg, tail,
                  nbr0, cnt0, slot, up_nbr, up_cnt, visited, tag, cand, res):
    """Best-first search from ``ep``; returns the result keys sorted ascending."""
    visited[ep] = tag
    key0 = (np.int64(_dist(codes, ep, q, t, n_b, seg, tail)) << _SHIFT) | ep
    nc = _push(cand, 0, key0)
    nr = _push(res, 0, -key0)  # max-heap through negation
    while nc > 0:
        c, nc = _pop(cand, nc)
        worst = -res[0]
        if nr >= ef and (c >> _SHIFT) > (worst >> _SHIFT):
            break
        node = c & _LOW
        links, cnt = _links(node, layer, nbr0, cnt0, slot, up_nbr, up_cnt)
        for j in range(cnt):
            e = links[j]
            if visited[e] == tag:
                continue
            visited[e] = tag
            key = (np.int64(_dist(codes, e, q, t, n_b, seg, tail)) << _SHIFT) | e
            if nr < ef or key < -res[0]:
                nc = _push(cand, nc, key)
                nr = _push(res, nr, -key)
                if nr > ef:
                    _, nr = _pop(res, nr)
    out = np.empty(nr, dtype=np.int64)
    for i in range(nr):
        out[i] = -res[i]
    out.sort()
    return out


@nb.njit
def _select(codes, keys, limit, t, n_b, seg, tail):
    """Neighbour heuristic: keep a candidate unless an already kept one is closer to it."""
    chosen = np.empty(min(limit, keys.shape[0]), dtype=np.int64)
    k = 0
    for i in range(keys.shape[0]):
        if k >= limit:
            break
        e = keys[i] & _LOW
        de = keys[i] >> _SHIFT
        good = True
        for j in range(k):
            if _dist(codes, chosen[j], codes[e], t, n_b, seg, tail) < de:
                good = False
                break
        if good:
            chosen[k] = e
            k += 1
    return chosen[:k]


@nb.njit
def _connect(codes, node, layer, new, t, n_b, seg, tail, mmax,
             nbr0, cnt0, slot, up_nbr, up_cnt):
    links, cnt = _links(node, layer, nbr0, cnt0, slot, up_nbr, up_cnt)
    if cnt < mmax:
        links[cnt] = new
        if layer == 0:
            cnt0[node] = cnt + 1
        else:
            up_cnt[slot[node], layer - 1] = cnt + 1
        return
    keys = np.empty(cnt + 1, dtype=np.int64)
    base = codes[node]
    for j in range(cnt):
        e = links[j]
        keys[j] = (np.int64(_dist(codes, e, base, t, n_b, seg, tail)) << _SHIFT) | e
    keys[cnt] = (np.int64(_dist(codes, new, base, t, n_b, seg, tail)) << _SHIFT) | new
    keys.sort()
    kept = _select(codes, keys, mmax, t, n_b, seg, tail)
    for j in range(kept.shape[0]):
        links[j] = kept[j]
    for j in range(kept.shape[0], links.shape[0]):
        links[j] = -1
    if layer == 0:
        cnt0[node] = kept.shape[0]
    else:
        up_cnt[slot[node], layer - 1] = kept.shape[0]


@nb.njit(cache=True)
def _build(codes, levels, M, ef_c, t, n_b, seg, tail, nbr0, cnt0, slot, up_nbr, up_cnt):
    n = codes.shape[0]
    visited = np.zeros(n, dtype=np.int32)
    cand = np.empty(n + 1, dtype=np.int64)
    res = np.empty(ef_c + 2, dtype=np.int64)
    entry = 0
    max_level = levels[0]
    tag = 0
    for i in range(1, n):
        q = codes[i]
        lvl = levels[i]
        ep = entry
        for layer in range(max_level, lvl, -1):
            ep = _greedy(codes, q, ep, layer, t, n_b, seg, tail, nbr0, cnt0, slot, up_nbr, up_cnt)
        for layer in range(min(lvl, max_level), -1, -1):
            tag += 1
            found = _search_layer(codes, q, ep, ef_c, layer, t, n_b, seg, tail,
                                  nbr0, cnt0, slot, up_nbr, up_cnt, visited, tag, cand, res)
            chosen = _select(codes, found, M, t, n_b, seg, tail)
            links, _ = _links(i, layer, nbr0, cnt0, slot, up_nbr, up_cnt)
            for j in range(chosen.shape[0]):
                links[j] = chosen[j]
            if layer == 0:
                cnt0[i] = chosen.shape[0]
            else:
                up_cnt[slot[i], layer - 1] = chosen.shape[0]
            mmax = 2 * M if layer == 0 else M
            for j in range(chosen.shape[0]):
                _connect(codes, chosen[j], layer, i, t, n_b, seg, tail, mmax,
                         nbr0, cnt0, slot, up_nbr, up_cnt)
            ep = found[0] & _LOW
        if lvl > max_level:
            max_level = lvl
            entry = i
    return entry, max_level


@nb.njit(cache=True)
def _search(codes, queries, entry, max_level, ef, t, n_b, seg, tail,
            nbr0, cnt0, slot, up_nbr, up_cnt):
    n = codes.shape[0]
    nq = queries.shape[0]
    visited = np.zeros(n, dtype=np.int32)
    cand = np.empty(n + 1, dtype=np.int64)
    res = np.empty(ef + 2, dtype=np.int64)
    out = np.full((nq, ef), -1, dtype=np.int64)
    for qi in range(nq):
        q = queries[qi]
        ep = entry
        for layer in range(max_level, 0, -1):
            ep = _greedy(codes, q, ep, layer, t, n_b, seg, tail, nbr0, cnt0, slot, up_nbr, up_cnt)
        found = _search_layer(codes, q, ep, ef, 0, t, n_b, seg, tail,
                              nbr0, cnt0, slot, up_nbr, up_cnt, visited, qi + 1, cand, res)
        out[qi, : found.shape[0]] = found
    return out


@dataclass
class HnswIndex:
    codes: PackedCodes
    M: int
    ef_construction: int
    levels: np.ndarray
    nbr0: np.ndarray
    cnt0: np.ndarray
    slot: np.ndarray
    up_nbr: np.ndarray
    up_cnt: np.ndarray
    entry: int
    max_level: int

    @property
    def n(self) -> int:
        return self.codes.n

    def neighbors(self, node: int, layer: int = 0) -> np.ndarray:
        if layer == 0:
            return self.nbr0[node, : self.cnt0[node]]
        if self.levels[node] < layer:
            return np.empty(0, dtype=np.int32)
        s = self.slot[node]
        return self.up_nbr[s, layer - 1, : self.up_cnt[s, layer - 1]]

    def _graph_args(self):
        return (self.nbr0, self.cnt0, self.slot, self.up_nbr, self.up_cnt)


def _levels(n: int, M: int, seed: int) -> np.ndarray:
    ml = 1.0 / math.log(M) if M > 1 else 1.0
    u = 1.0 - stream(seed, 0, _PURPOSE).random(n)  # in (0, 1]
    return np.floor(-np.log(u) * ml).astype(np.int32)


def _allocate(levels: np.ndarray, M: int):
    n = levels.shape[0]
    top = int(levels.max()) if n else 0
    slot = np.full(n, -1, dtype=np.int32)
    upper = np.flatnonzero(levels > 0)
    slot[upper] = np.arange(upper.shape[0], dtype=np.int32)
    nbr0 = np.full((n, 2 * M), -1, dtype=np.int32)
    cnt0 = np.zeros(n, dtype=np.int32)
    up_nbr = np.full((upper.shape[0], max(top, 1), M), -1, dtype=np.int32)
    up_cnt = np.zeros((upper.shape[0], max(top, 1)), dtype=np.int32)
    return nbr0, cnt0, slot, up_nbr, up_cnt


def hnsw_build(codes: PackedCodes, M: int = 32, ef_construction: int = 500, seed: int = 0) -> HnswIndex:
    """Insert all codes in id order into a layered proximity graph."""
    if codes.n < 1:
        raise ParameterError("cannot build an HNSW graph over an empty code set")
    if M < 2 or ef_construction < 1:
        raise ParameterError("M must be >= 2 and efConstruction >= 1")
    levels = _levels(codes.n, M, seed)
    graph = _allocate(levels, M)
    entry, max_level = _build(codes.data, levels, M, ef_construction, codes.t, codes.n_b,
                              codes.seg_mask, codes.tail_mask, *graph)
    return HnswIndex(codes, M, ef_construction, levels, *graph, int(entry), int(max_level))


def hnsw_search(index: HnswIndex, query, k: int = 10, ef_search: int = 64) -> SearchResult:
    """Greedy descent then best-first search at layer 0 with pool ``ef_search``."""
    if ef_search < k:
        raise ParameterError(f"efSearch={ef_search} must be >= k={k}")
    k = clamp_k(k, index.n)
    q = np.ascontiguousarray(_queries(index.codes, query))
    c = index.codes
    keys = _search(c.data, q, index.entry, index.max_level, ef_search, c.t, c.n_b,
                   c.seg_mask, c.tail_mask, *index._graph_args())
    rows = []
    for row in keys:
        row = row[row >= 0][:k]
        ids = row & 0xFFFFFFFF
        rows.append(padded(ids, (c.t - (row >> 32)).astype(np.int32), k))
    return SearchResult.stack(rows)


def save_hnsw(path, index: HnswIndex) -> None:
    c = index.codes
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(b"IKEH", index.M, index.ef_construction, index.n,
                              index.max_level, index.entry, c.t, c.n_b))
        fh.write(index.levels.astype("<i4").tobytes())
        fh.write(index.cnt0.astype("<u4").tobytes())
        fh.write(index.nbr0.astype("<i4").tobytes())
        for node in np.flatnonzero(index.levels > 0):
            s = index.slot[node]
            for layer in range(1, index.levels[node] + 1):
                fh.write(struct.pack("<I", index.up_cnt[s, layer - 1]))
                fh.write(index.up_nbr[s, layer - 1].astype("<i4").tobytes())


def load_hnsw(path, codes: PackedCodes) -> HnswIndex:
    raw = open(path, "rb").read()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated HNSW header")
    magic, M, ef_c, n, max_level, entry, t, n_b = _HEADER.unpack_from(raw)
    if magic != b"IKEH":
        raise FormatError(f"{path}: bad magic {magic!r}, expected b'IKEH'")
    if n != codes.n or t != codes.t or n_b != codes.n_b:
        raise FormatError(f"{path}: index was built for n={n}, t={t}, n_b={n_b}; "
                          f"codes have n={codes.n}, t={codes.t}, n_b={codes.n_b}")
    off = _HEADER.size
    try:
        levels = np.frombuffer(raw, "<i4", n, off).astype(np.int32)
        off += 4 * n
        nbr0, cnt0, slot, up_nbr, up_cnt = _allocate(levels, M)
        cnt0[:] = np.frombuffer(raw, "<u4", n, off)
        off += 4 * n
        nbr0[:] = np.frombuffer(raw, "<i4", n * 2 * M, off).reshape(n, 2 * M)
        off += 4 * n * 2 * M
        for node in np.flatnonzero(levels > 0):
            s = slot[node]
            for layer in range(1, levels[node] + 1):
                (up_cnt[s, layer - 1],) = struct.unpack_from("<I", raw, off)
                off += 4
                up_nbr[s, layer - 1] = np.frombuffer(raw, "<i4", M, off)
                off += 4 * M
    except (ValueError, struct.error) as exc:
        raise FormatError(f"{path}: truncated HNSW payload") from exc
    if off != len(raw):
        raise FormatError(f"{path}: trailing bytes after HNSW payload")
    return HnswIndex(codes, M, ef_c, levels, nbr0, cnt0, slot, up_nbr, up_cnt, entry, max_level)
