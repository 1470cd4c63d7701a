"""Numba kernels for the hot loops: code comparison, tree routing, Voronoi assignment."""

from __future__ import annotations

import numba as nb
import numpy as np
from numba import types
from numba.extending import intrinsic

# the bundled TBB is too old for numba; OpenMP is always present
if nb.config.THREADING_LAYER == "default":
    nb.config.THREADING_LAYER = "omp"


@intrinsic
def popcount64(typingctx, x):
    sig = types.uint64(types.uint64)

    def codegen(context, builder, signature, args):
        return builder.ctpop(args[0])

    return sig, codegen


@nb.njit(inline="always")
def _fold(d, n_b):
    # propagate any set bit of an n_b-bit segment down to the segment's lowest bit
    if n_b == 1:
        return d
    m = d | (d >> np.uint64(1))
    if n_b >= 4:
        m |= m >> np.uint64(2)
    if n_b == 8:
        m |= m >> np.uint64(4)
    return m


@nb.njit(inline="always")
def match_words(a, b, n_b, seg_mask, tail_mask):
    """Number of equal n_b-bit elements between two packed code rows."""
    w = a.shape[0]
    ones = 0
    if n_b == 1:
        for j in range(w - 1):
            ones += popcount64(a[j] ^ b[j])
        ones += popcount64((a[w - 1] ^ b[w - 1]) | tail_mask)
    else:
        for j in range(w - 1):
            ones += popcount64(_fold(a[j] ^ b[j], n_b) | seg_mask)
        ones += popcount64(_fold(a[w - 1] ^ b[w - 1], n_b) | seg_mask | tail_mask)
    return 64 * w - ones


@nb.njit(parallel=True, cache=True)
def scan(codes, query, n_b, seg_mask, tail_mask):
    n = codes.shape[0]
    out = np.empty(n, dtype=np.int32)
    for i in nb.prange(n):
        out[i] = match_words(codes[i], query, n_b, seg_mask, tail_mask)
    return out


@nb.njit(parallel=True, cache=True)
def scan_subset(codes, ids, query, n_b, seg_mask, tail_mask):
    out = np.empty(ids.shape[0], dtype=np.int32)
    for i in nb.prange(ids.shape[0]):
        out[i] = match_words(codes[ids[i]], query, n_b, seg_mask, tail_mask)
    return out


@nb.njit(parallel=True, cache=True)
def scan_pairs(a, b, n_b, seg_mask, tail_mask):
    out = np.empty(a.shape[0], dtype=np.int32)
    for i in nb.prange(a.shape[0]):
        out[i] = match_words(a[i], b[i], n_b, seg_mask, tail_mask)
    return out


@nb.njit(parallel=True, cache=True)
def route_forest(X, feature, threshold, right, leaf, roots, out):
    """Leaf index of every row of ``X`` in every tree.

    Trees are stored as concatenated preorder node arrays: the left child of
    internal node ``k`` is ``k + 1``; the right child is ``k + right[k]``.
    """
    n = X.shape[0]
    t = roots.shape[0]
    for i in nb.prange(n):
        x = X[i]
        for j in range(t):
            k = roots[j]
            while feature[k] >= 0:
                if x[feature[k]] < threshold[k]:
                    k += 1
                else:
                    k += right[k]
            out[i, j] = leaf[k]


@nb.njit(parallel=True, cache=True)
def nearest_anchor(X, dims, anchors, out):
    """Index of the nearest anchor (squared l2 over the partition's dims), lowest index on ties."""
    n = X.shape[0]
    t, psi, m = anchors.shape
    for i in nb.prange(n):
        x = X[i]
        for j in range(t):
            best = np.inf
            arg = 0
            for a in range(psi):
                acc = 0.0
                for c in range(m):
                    diff = np.float64(x[dims[j, c]]) - np.float64(anchors[j, a, c])
                    acc += diff * diff
                if acc < best:
                    best = acc
                    arg = a
            out[i, j] = arg


@nb.njit(cache=True)
def sq_dists(x, C):
    """Squared l2 from one vector to each row of ``C``, accumulated like :func:`nearest_anchor`."""
    out = np.empty(C.shape[0], dtype=np.float64)
    for a in range(C.shape[0]):
        acc = 0.0
        for c in range(C.shape[1]):
            diff = np.float64(x[c]) - np.float64(C[a, c])
            acc += diff * diff
        out[a] = acc
    return out
