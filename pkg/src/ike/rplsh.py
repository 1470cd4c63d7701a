"""Random-projection sign hashing, the 1-bit baseline.

Bit ``i`` of a code is ``<w_i, x> >= 0`` for a Gaussian row ``w_i``.  Codes
use the same packed layout as partition indices with ``n_b = 1``, so they
plug into every scan and index.
"""

from __future__ import annotations

import numpy as np

from .codec import PackedCodes, pack
from .core import IkeParams, ParameterError, stream

__all__ = ["RplshModel", "build_rplsh", "rplsh_encode"]

# stream purpose tag, keeps projection rows apart from tree streams under the same seed
_PURPOSE = 2


class RplshModel:
    kind = "rplsh"

    def __init__(self, projection: np.ndarray, seed: int = 0):
        projection = np.ascontiguousarray(projection, dtype=np.float32)
        if projection.ndim != 2:
            raise ParameterError("projection must be a t_bits x d matrix")
        self.projection = projection
        self.seed = int(seed)
        self.params = IkeParams(t=projection.shape[0], psi=2, seed=self.seed)

    @property
    def t(self) -> int:
        return self.projection.shape[0]

    @property
    def d(self) -> int:
        return self.projection.shape[1]

    psi = 2
    n_b = 1

    def transform(self, X, chunk: int = 8192) -> np.ndarray:
        X = np.asarray(X, dtype=np.float32)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.d:
            raise ParameterError(f"dimension mismatch: model expects d={self.d}, got {X.shape[1]}")
        out = np.empty((X.shape[0], self.t), dtype=np.uint8)
        P = self.projection.astype(np.float64)
        for s in range(0, X.shape[0], chunk):
            out[s : s + chunk] = (X[s : s + chunk].astype(np.float64) @ P.T) >= 0
        return out

    def encode(self, X) -> PackedCodes:
        return pack(self.transform(X), 1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RplshModel):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.projection, other.projection)


def build_rplsh(d: int, t_bits: int, seed: int = 0) -> RplshModel:
    """Draw a ``t_bits x d`` standard-normal projection, one stream per row."""
    if d < 1 or t_bits < 1:
        raise ParameterError("d and t_bits must be >= 1")
    rows = [stream(seed, i, _PURPOSE).standard_normal(d) for i in range(t_bits)]
    return RplshModel(np.asarray(rows, dtype=np.float32), seed)


def rplsh_encode(model: RplshModel, x) -> PackedCodes:
    return model.encode(x)
