"""Partitioner factory and the ``IKE1`` model file.

Model file layout (little-endian)::

    header   magic "IKE1" | version u16 | kind u8 | d u32 | t u32 | psi u32 | m u32 | n_b u8 | seed u64
    payload  kind 0 (iforest): per tree, preorder records
                 flag u8 (1 internal, 0 leaf) | split_dim or leaf_index u32 | split_value f32 | right_offset u32
             kind 1 (voronoi): per partition, m dim ids (u32) then psi*m anchor floats (f32)
             kind 2 (rplsh):   "IKEL" | t_bits u32 | d u32 | t_bits*d floats (f32)
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

from .core import FormatError, IkeParams, ParameterError
from .iforest import IForest, ITree, build_forest
from .rplsh import RplshModel, build_rplsh
from .voronoi import VdModel, build_vd

__all__ = ["KINDS", "Model", "build_model", "save_model", "load_model", "model_bytes"]

Model = Union[IForest, VdModel, RplshModel]

KINDS = {"iforest": 0, "voronoi": 1, "rplsh": 2}
_KIND_NAMES = {v: k for k, v in KINDS.items()}

MODEL_MAGIC = b"IKE1"
MODEL_VERSION = 1
_HEADER = struct.Struct("<4sHBIIIIBQ")
_NODE = np.dtype([("flag", "u1"), ("a", "<u4"), ("v", "<f4"), ("r", "<u4")])
_LSH_HEADER = struct.Struct("<4sII")


def build_model(kind: str, data, t: int, psi: int = 2, m: int | None = None,
                seed: int = 0, threads: int | None = None) -> Model:
    """Build any partitioner kind from a corpus (rplsh ignores ``psi`` and ``m``)."""
    if kind == "iforest":
        return build_forest(data, IkeParams(t=t, psi=psi, seed=seed), threads=threads)
    if kind == "voronoi":
        return build_vd(data, IkeParams(t=t, psi=psi, seed=seed, m=m))
    if kind == "rplsh":
        d = np.asarray(data).shape[-1]
        return build_rplsh(d, t, seed)
    raise ParameterError(f"unknown model kind {kind!r}; expected one of {sorted(KINDS)}")


def _forest_payload(forest: IForest) -> bytes:
    parts = []
    for tree in forest.trees:
        rec = np.zeros(tree.n_nodes, dtype=_NODE)
        internal = tree.feature >= 0
        rec["flag"] = internal
        rec["a"] = np.where(internal, tree.feature, tree.leaf)
        rec["v"] = np.where(internal, tree.threshold, 0.0)
        rec["r"] = np.where(internal, tree.right, 0)
        parts.append(rec.tobytes())
    return b"".join(parts)


def model_bytes(model: Model) -> bytes:
    kind = KINDS[model.kind]
    m = model.m if isinstance(model, VdModel) else 0
    header = _HEADER.pack(MODEL_MAGIC, MODEL_VERSION, kind, model.d, model.t,
                          model.psi, m, model.n_b, model.params.seed)
    if isinstance(model, IForest):
        payload = _forest_payload(model)
    elif isinstance(model, VdModel):
        chunks = []
        for i in range(model.t):
            chunks.append(model.dims[i].astype("<u4").tobytes())
            chunks.append(model.anchors[i].astype("<f4").tobytes())
        payload = b"".join(chunks)
    else:
        payload = (_LSH_HEADER.pack(b"IKEL", model.t, model.d)
                   + model.projection.astype("<f4").tobytes())
    return header + payload


def save_model(path, model: Model) -> None:
    Path(path).write_bytes(model_bytes(model))


def _parse_forest(buf: bytes, t: int, d: int, psi: int, seed: int) -> IForest:
    if len(buf) % _NODE.itemsize:
        raise FormatError("forest payload is not a whole number of node records")
    rec = np.frombuffer(buf, dtype=_NODE)
    flags = rec["flag"]
    if np.any(flags > 1):
        raise FormatError("invalid node flag")
    trees = []
    start = 0
    pending = 0
    for k, flag in enumerate(flags.tolist()):
        pending += 1 if flag else -1
        if pending == -1:
            r = rec[start : k + 1]
            internal = r["flag"] == 1
            trees.append(ITree(
                np.where(internal, r["a"], -1).astype(np.int32),
                np.where(internal, r["v"], 0).astype(np.float32),
                np.where(internal, r["r"], 0).astype(np.int32),
                np.where(internal, -1, r["a"]).astype(np.int32),
            ))
            start = k + 1
            pending = 0
    if pending != 0 or start != len(flags) or len(trees) != t:
        raise FormatError(f"forest payload holds {len(trees)} complete trees, header says {t}")
    for tree in trees:
        if np.any(tree.feature >= d) or np.any(tree.leaf >= psi):
            raise FormatError("node record out of range for header dimensions")
    return IForest(trees, IkeParams(t=t, psi=psi, seed=seed), d)


def load_model(path) -> Model:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated model header")
    magic, version, kind, d, t, psi, m, n_b, seed = _HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model version {version}")
    if kind not in _KIND_NAMES:
        raise FormatError(f"{path}: unknown model kind {kind}")
    payload = raw[_HEADER.size:]
    try:
        if kind == 0:
            model = _parse_forest(payload, t, d, psi, seed)
        elif kind == 1:
            per = 4 * m + 4 * psi * m
            if len(payload) != t * per:
                raise FormatError(f"{path}: voronoi payload size mismatch")
            dims = np.empty((t, m), dtype=np.int32)
            anchors = np.empty((t, psi, m), dtype=np.float32)
            for i in range(t):
                off = i * per
                dims[i] = np.frombuffer(payload, "<u4", m, off)
                anchors[i] = np.frombuffer(payload, "<f4", psi * m, off + 4 * m).reshape(psi, m)
            model = VdModel(dims, anchors, IkeParams(t=t, psi=psi, seed=seed, m=m), d)
        else:
            tag, tb, dd = _LSH_HEADER.unpack_from(payload)
            body = payload[_LSH_HEADER.size:]
            if tag != b"IKEL" or tb != t or dd != d or len(body) != 4 * t * d:
                raise FormatError(f"{path}: malformed rplsh payload")
            model = RplshModel(np.frombuffer(body, "<f4").reshape(t, d), seed)
    except (ParameterError, struct.error, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path}: {exc}") from exc
    if model.n_b != n_b:
        raise FormatError(f"{path}: header n_b={n_b} inconsistent with psi={psi}")
    return model
