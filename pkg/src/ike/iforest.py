"""Isolation-forest partitioner.

Each iTree recursively splits its ``psi``-point sample on a uniformly chosen
dimension ``q`` at a value ``p`` drawn from ``[min_q, max_q)`` of the node's
points, routing ``x_q < p`` left and ``x_q >= p`` right.  A node becomes a
leaf when it holds one point, sits at the height limit ``ceil(log2(psi))``, or
the split leaves one side empty.  Leaves are numbered 0, 1, ... in left-first
depth-first order; the leaf a point reaches is its cell index for that tree.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .codec import PackedCodes, pack
from .core import IkeParams, ParameterError, as_embeddings, stream, subsample
from .parallel import get_threads

__all__ = ["ITree", "IForest", "build_itree", "build_forest", "map_point", "map_points"]


@dataclass(frozen=True)
class ITree:
    """Preorder node arrays of one tree.

    ``feature[k] == -1`` marks a leaf.  For an internal node the left child is
    ``k + 1`` and the right child ``k + right[k]``.
    """

    feature: np.ndarray  # int32
    threshold: np.ndarray  # float32
    right: np.ndarray  # int32, relative offset
    leaf: np.ndarray  # int32, -1 on internal nodes

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            k, dep = stack.pop()
            if self.feature[k] < 0:
                best = max(best, dep)
            else:
                stack.append((k + 1, dep + 1))
                stack.append((k + int(self.right[k]), dep + 1))
        return best


def _draw_split(lo: np.float32, hi: np.float32, rng: np.random.Generator) -> np.float32:
    # uniform on [lo, hi) in float32; degenerate range yields lo
    if not lo < hi:
        return lo
    p = np.float32(float(lo) + rng.random() * (float(hi) - float(lo)))
    if p >= hi:
        p = np.nextafter(hi, np.float32(-np.inf))
    return max(p, lo)


def build_itree(sample, height_limit: int, rng: np.random.Generator) -> ITree:
    """Grow one iTree on ``sample`` (psi x d float32)."""
    sample = np.asarray(sample, dtype=np.float32)
    if sample.ndim != 2 or sample.shape[0] < 1:
        raise ParameterError("iTree sample must contain at least one point")
    d = sample.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    right: list[int] = []
    leaf: list[int] = []
    n_leaves = 0

    def grow(rows: np.ndarray, depth: int) -> None:
        nonlocal n_leaves
        k = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        right.append(0)
        leaf.append(-1)
        if rows.shape[0] <= 1 or depth >= height_limit:
            leaf[k] = n_leaves
            n_leaves += 1
            return
        q = int(rng.integers(d))
        col = rows[:, q]
        p = _draw_split(col.min(), col.max(), rng)
        go_left = col < p
        n_left = int(go_left.sum())
        if n_left == 0 or n_left == rows.shape[0]:
            leaf[k] = n_leaves
            n_leaves += 1
            return
        feature[k] = q
        threshold[k] = p
        grow(rows[go_left], depth + 1)
        right[k] = len(feature) - k
        grow(rows[~go_left], depth + 1)

    grow(sample, 0)
    return ITree(
        np.asarray(feature, dtype=np.int32),
        np.asarray(threshold, dtype=np.float32),
        np.asarray(right, dtype=np.int32),
        np.asarray(leaf, dtype=np.int32),
    )


class IForest:
    """An ensemble of ``t`` iTrees built from independent samples and streams."""

    kind = "iforest"

    def __init__(self, trees: list[ITree], params: IkeParams, d: int):
        if len(trees) != params.t:
            raise ParameterError(f"expected {params.t} trees, got {len(trees)}")
        self.trees = list(trees)
        self.params = params
        self.d = int(d)
        sizes = np.array([tr.n_nodes for tr in self.trees], dtype=np.int64)
        self._roots = np.zeros(len(self.trees), dtype=np.int64)
        self._roots[1:] = np.cumsum(sizes)[:-1]
        self._feature = np.concatenate([tr.feature for tr in self.trees])
        self._threshold = np.concatenate([tr.threshold for tr in self.trees])
        self._right = np.concatenate([tr.right for tr in self.trees])
        self._leaf = np.concatenate([tr.leaf for tr in self.trees])

    @property
    def t(self) -> int:
        return self.params.t

    @property
    def psi(self) -> int:
        return self.params.psi

    @property
    def n_b(self) -> int:
        return self.params.n_b

    @property
    def height_limit(self) -> int:
        return self.params.height_limit

    def transform(self, X) -> np.ndarray:
        """Leaf index of each row in each tree, as an ``n x t`` uint8 matrix."""
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.d:
            raise ParameterError(f"dimension mismatch: forest expects d={self.d}, got {X.shape[1]}")
        out = np.empty((X.shape[0], self.t), dtype=np.uint8)
        if X.shape[0]:
            _kernels.route_forest(
                np.ascontiguousarray(X), self._feature, self._threshold,
                self._right, self._leaf, self._roots, out,
            )
        return out

    def encode(self, X) -> PackedCodes:
        return pack(self.transform(X), self.n_b)

    def __eq__(self, other) -> bool:
        if not isinstance(other, IForest):
            return NotImplemented
        return (
            self.params == other.params and self.d == other.d
            and np.array_equal(self._feature, other._feature)
            and np.array_equal(self._threshold, other._threshold)
            and np.array_equal(self._right, other._right)
            and np.array_equal(self._leaf, other._leaf)
        )


def _one_tree(data: np.ndarray, params: IkeParams, i: int) -> ITree:
    rng = stream(params.seed, i)
    rows = subsample(data.shape[0], params.psi, rng)
    return build_itree(data[rows], params.height_limit, rng)


def build_forest(data, params: IkeParams, threads: int | None = None) -> IForest:
    """Build ``params.t`` trees; tree ``i`` uses ``stream(seed, i)`` only."""
    data = as_embeddings(data)
    if params.psi > data.shape[0]:
        raise ParameterError(f"psi={params.psi} exceeds the number of points n={data.shape[0]}")
    threads = get_threads() if threads is None else threads
    if threads > 1 and params.t > 1:
        with ThreadPoolExecutor(threads) as pool:
            trees = list(pool.map(lambda i: _one_tree(data, params, i), range(params.t)))
    else:
        trees = [_one_tree(data, params, i) for i in range(params.t)]
    return IForest(trees, params, data.shape[1])


def map_points(forest: IForest, X) -> np.ndarray:
    return forest.transform(X)


def map_point(forest: IForest, x) -> np.ndarray:
    """Partition-index vector (length ``t``) of a single point."""
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 1:
        raise ParameterError("map_point expects a single d-dim vector")
    return forest.transform(x[None, :])[0]
