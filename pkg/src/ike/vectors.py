"""Embedding file formats.

* ``.fvecs``: per vector a little-endian int32 dimension followed by that many float32.
* raw float32: a headerless row-major ``n x d`` float32 file plus a JSON sidecar
  ``<path>.json`` holding ``{"n": ..., "d": ...}``; read through a memory map.
"""

from __future__ import annotations

import json
import warnings
from pathlib import Path

import numpy as np

from .core import FormatError

__all__ = ["read_fvecs", "write_fvecs", "read_raw", "write_raw", "read_vectors", "write_vectors"]


def read_fvecs(path) -> np.ndarray:
    path = Path(path)
    if path.stat().st_size % 4:
        raise FormatError(f"{path}: size is not a multiple of 4 bytes")
    raw = np.fromfile(path, dtype="<i4")
    if raw.size == 0:
        return np.empty((0, 0), dtype=np.float32)
    d = int(raw[0])
    if d <= 0:
        raise FormatError(f"{path}: invalid dimension {d} in first record")
    if raw.size % (d + 1):
        raise FormatError(f"{path}: file size is not a whole number of {d}-dim records")
    rows = raw.reshape(-1, d + 1)
    if np.any(rows[:, 0] != d):
        bad = int(np.argmax(rows[:, 0] != d))
        raise FormatError(f"{path}: record {bad} has dimension {rows[bad, 0]}, expected {d}")
    return np.ascontiguousarray(rows[:, 1:]).view("<f4").astype(np.float32, copy=False)


def write_fvecs(path, X) -> None:
    X = np.asarray(X)
    if X.dtype == np.float64:
        warnings.warn("writing float64 vectors as float32", stacklevel=2)
    X = np.ascontiguousarray(X, dtype="<f4")
    n, d = X.shape
    out = np.empty((n, d + 1), dtype="<i4")
    out[:, 0] = d
    out[:, 1:] = X.view("<i4")
    out.tofile(path)


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def read_raw(path, mmap: bool = True) -> np.ndarray:
    path = Path(path)
    side = _sidecar(path)
    if not side.exists():
        raise FormatError(f"{path}: missing sidecar header {side.name}")
    meta = json.loads(side.read_text())
    n, d = int(meta["n"]), int(meta["d"])
    if path.stat().st_size != 4 * n * d:
        raise FormatError(f"{path}: size does not match sidecar n={n}, d={d}")
    if n == 0:
        return np.empty((0, d), dtype=np.float32)
    if mmap:
        return np.memmap(path, dtype="<f4", mode="r", shape=(n, d))
    return np.fromfile(path, dtype="<f4").reshape(n, d)


def write_raw(path, X) -> None:
    path = Path(path)
    X = np.ascontiguousarray(X, dtype="<f4")
    X.tofile(path)
    _sidecar(path).write_text(json.dumps({"n": int(X.shape[0]), "d": int(X.shape[1])}))


def read_vectors(path) -> np.ndarray:
    """Load by extension: ``.fvecs`` or raw float32 with sidecar."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if path.suffix == ".fvecs":
        return read_fvecs(path)
    return read_raw(path)


def write_vectors(path, X) -> None:
    if Path(path).suffix == ".fvecs":
        write_fvecs(path, X)
    else:
        write_raw(path, X)
