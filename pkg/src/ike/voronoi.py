"""Voronoi-diagram partitioner on random subspaces.

Partition ``i`` keeps ``m`` distinct dimensions chosen uniformly at random and
``psi`` anchor points sampled from the corpus; a point's cell is the index of
its nearest anchor (squared l2 over those dimensions, lowest index on ties).
With ``m == d`` every partition uses the full space.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import _kernels
from .codec import PackedCodes, pack
from .core import IkeParams, ParameterError, as_embeddings, stream, subsample

__all__ = ["VoronoiPartition", "VdModel", "build_vd", "map_point_vd"]


@dataclass(frozen=True)
class VoronoiPartition:
    dims: np.ndarray  # (m,) int32, ascending
    anchors: np.ndarray  # (psi, m) float32


class VdModel:
    kind = "voronoi"

    def __init__(self, dims: np.ndarray, anchors: np.ndarray, params: IkeParams, d: int):
        dims = np.ascontiguousarray(dims, dtype=np.int32)
        anchors = np.ascontiguousarray(anchors, dtype=np.float32)
        t, psi, m = anchors.shape
        if dims.shape != (t, m) or t != params.t or psi != params.psi:
            raise ParameterError("partition arrays do not match the model parameters")
        if dims.min() < 0 or dims.max() >= d:
            raise ParameterError(f"dimension ids must lie in [0, {d})")
        self.dims = dims
        self.anchors = anchors
        self.params = params
        self.d = int(d)

    @property
    def t(self) -> int:
        return self.params.t

    @property
    def psi(self) -> int:
        return self.params.psi

    @property
    def m(self) -> int:
        return self.dims.shape[1]

    @property
    def n_b(self) -> int:
        return self.params.n_b

    @property
    def partitions(self) -> list[VoronoiPartition]:
        return [VoronoiPartition(self.dims[i], self.anchors[i]) for i in range(self.t)]

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.d:
            raise ParameterError(f"dimension mismatch: model expects d={self.d}, got {X.shape[1]}")
        out = np.empty((X.shape[0], self.t), dtype=np.uint8)
        if X.shape[0]:
            _kernels.nearest_anchor(np.ascontiguousarray(X), self.dims, self.anchors, out)
        return out

    def encode(self, X) -> PackedCodes:
        return pack(self.transform(X), self.n_b)

    def __eq__(self, other) -> bool:
        if not isinstance(other, VdModel):
            return NotImplemented
        return (
            self.params == other.params and self.d == other.d
            and np.array_equal(self.dims, other.dims)
            and np.array_equal(self.anchors, other.anchors)
        )


def build_vd(data, params: IkeParams) -> VdModel:
    """Build ``params.t`` subspace Voronoi partitions (``params.m`` defaults to ``d``)."""
    data = as_embeddings(data)
    n, d = data.shape
    m = d if params.m is None else int(params.m)
    if not 1 <= m <= d:
        raise ParameterError(f"m must be in [1, d={d}], got {m}")
    if params.psi > n:
        raise ParameterError(f"psi={params.psi} exceeds the number of points n={n}")
    dims = np.empty((params.t, m), dtype=np.int32)
    anchors = np.empty((params.t, params.psi, m), dtype=np.float32)
    full = np.arange(d, dtype=np.int32)
    for i in range(params.t):
        rng = stream(params.seed, i)
        dims[i] = full if m == d else np.sort(rng.choice(d, size=m, replace=False))
        rows = subsample(n, params.psi, rng)
        anchors[i] = data[np.ix_(rows, dims[i])]
    return VdModel(dims, anchors, replace(params, m=m), d)


def map_point_vd(model: VdModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 1:
        raise ParameterError("map_point_vd expects a single d-dim vector")
    return model.transform(x[None, :])[0]
