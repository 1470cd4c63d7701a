"""Shared types, parameter rules and the deterministic seeding scheme.

Every randomized structure in the package (one iTree, one Voronoi
partition, one projection row, ...) draws from its own generator obtained
through :func:`stream`.  The generator seed is a 64-bit mix of the master
seed and the structure index::

    z = (seed + (index + 1) * 0x9E3779B97F4A7C15 + purpose * 0xD1B54A32D192ED03) mod 2**64
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z =  z ^ (z >> 31)

i.e. the splitmix64 finalizer.  The result seeds a PCG64 bit generator, so a
structure's randomness depends only on ``(seed, index, purpose)`` and never on
build order or thread count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "IkeError",
    "ParameterError",
    "EncodingError",
    "FormatError",
    "EvaluationError",
    "IkeParams",
    "derive_nb",
    "height_limit",
    "mix64",
    "stream",
    "subsample",
    "as_embeddings",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_PURPOSE = 0xD1B54A32D192ED03

SUPPORTED_NB = (1, 2, 4, 8)


class IkeError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(IkeError, ValueError):
    """An argument violates a documented precondition."""


class EncodingError(IkeError, ValueError):
    """Codes cannot be packed or compared with the given parameters."""


class FormatError(IkeError, ValueError):
    """A file does not follow the expected binary or text layout."""


class EvaluationError(IkeError, ValueError):
    """Runs and judgments cannot be evaluated together."""


def mix64(seed: int, index: int, purpose: int = 0) -> int:
    """splitmix64 mix of ``(seed, index, purpose)`` into one 64-bit integer."""
    z = (int(seed) + (int(index) + 1) * _GOLDEN + int(purpose) * _PURPOSE) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream(seed: int, index: int, purpose: int = 0) -> np.random.Generator:
    """Independent generator for structure ``index`` under master ``seed``.

    ``purpose`` separates unrelated uses of the same index (e.g. HNSW level
    draws versus k-means initialisation).
    """
    return np.random.Generator(np.random.PCG64(mix64(seed, index, purpose)))


def derive_nb(psi: int) -> int:
    """Smallest supported code width (1, 2, 4 or 8 bits) that can hold ``psi`` cells."""
    psi = int(psi)
    if psi < 2 or psi > 256:
        raise ParameterError(f"psi must be in [2, 256], got {psi}")
    need = math.ceil(math.log2(psi))
    for nb in SUPPORTED_NB:
        if nb >= need:
            return nb
    raise AssertionError("unreachable")  # pragma: no cover


def height_limit(psi: int) -> int:
    """Maximum iTree depth, ``ceil(log2(psi))`` (0 for a single-point sample)."""
    if psi < 1:
        raise ParameterError(f"psi must be >= 1, got {psi}")
    return math.ceil(math.log2(psi)) if psi > 1 else 0


@dataclass(frozen=True)
class IkeParams:
    """Encoding parameters shared by every partitioner kind.

    ``m`` is only meaningful for the Voronoi variant; ``n_b`` is derived from
    ``psi`` and not settable.
    """

    t: int
    psi: int
    seed: int = 0
    m: int | None = None

    def __post_init__(self):
        if int(self.t) < 1:
            raise ParameterError(f"t must be >= 1, got {self.t}")
        derive_nb(self.psi)
        if self.m is not None and int(self.m) < 1:
            raise ParameterError(f"m must be >= 1, got {self.m}")
        if not 0 <= int(self.seed) <= _MASK64:
            raise ParameterError("seed must fit in an unsigned 64-bit integer")

    @property
    def n_b(self) -> int:
        return derive_nb(self.psi)

    @property
    def height_limit(self) -> int:
        return height_limit(self.psi)


def as_embeddings(data, normalize: bool = False) -> np.ndarray:
    """Validate an ``n x d`` embedding matrix and return it as C-contiguous float32.

    Float64 input is down-converted with a warning.  Rows are the points, row
    ``i`` being point id ``i``.
    """
    arr = np.asarray(data)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError(f"expected a non-empty n x d matrix, got shape {arr.shape}")
    if arr.dtype == np.float64:
        warnings.warn("embeddings converted from float64 to float32", stacklevel=2)
    elif arr.dtype != np.float32 and not np.issubdtype(arr.dtype, np.number):
        raise ParameterError(f"embeddings must be numeric, got {arr.dtype}")
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    if not np.isfinite(arr).all():
        raise ParameterError("embeddings contain NaN or Inf")
    if normalize:
        norms = np.linalg.norm(arr, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        arr = np.ascontiguousarray(arr / norms, dtype=np.float32)
    return arr


def subsample(n: int, psi: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``psi`` distinct row ids out of ``n``, uniformly without replacement."""
    if psi < 1:
        raise ParameterError(f"psi must be >= 1, got {psi}")
    if psi > n:
        raise ParameterError(f"psi={psi} exceeds the number of points n={n}")
    return rng.choice(n, size=psi, replace=False)
