import struct

import numpy as np
import pytest

from ike.core import FormatError, ParameterError
from ike.models import build_model, load_model, model_bytes, save_model
from ike.vectors import read_fvecs, read_raw, read_vectors, write_fvecs, write_raw, write_vectors


@pytest.mark.parametrize("kind,psi,m", [("iforest", 2, None), ("iforest", 12, None), ("voronoi", 5, 3),
                                        ("voronoi", 4, None), ("rplsh", 2, None)])
def test_model_round_trip(tmp_path, rng, kind, psi, m):
    X = rng.normal(size=(200, 7)).astype(np.float32)
    model = build_model(kind, X, t=33, psi=psi, m=m, seed=42)
    save_model(tmp_path / "m", model)
    back = load_model(tmp_path / "m")
    assert back == model
    P = rng.normal(size=(100, 7)).astype(np.float32)
    assert np.array_equal(back.transform(P), model.transform(P))
    assert model_bytes(back) == model_bytes(model)


def test_model_header_fields(tmp_path, rng):
    X = rng.normal(size=(50, 9)).astype(np.float32)
    save_model(tmp_path / "m", build_model("voronoi", X, t=6, psi=12, m=4, seed=2**40 + 1))
    magic, ver, kind, d, t, psi, m, nb, seed = struct.unpack_from("<4sHBIIIIBQ", (tmp_path / "m").read_bytes())
    assert (magic, ver, kind, d, t, psi, m, nb, seed) == (b"IKE1", 1, 1, 9, 6, 12, 4, 4, 2**40 + 1)


def test_forest_records_are_13_byte_preorder(tmp_path, rng):
    X = rng.normal(size=(50, 3)).astype(np.float32)
    model = build_model("iforest", X, t=1, psi=2, seed=0)
    raw = model_bytes(model)
    body = raw[struct.calcsize("<4sHBIIIIBQ"):]
    tree = model.trees[0]
    assert len(body) == 13 * tree.n_nodes
    flag, dim, value, right = struct.unpack_from("<BIfI", body)
    assert flag == 1 and dim == tree.feature[0] and right == tree.right[0]
    assert np.float32(value) == tree.threshold[0]


def test_model_loader_rejects_bad_files(tmp_path, rng):
    X = rng.normal(size=(50, 3)).astype(np.float32)
    raw = model_bytes(build_model("iforest", X, t=4, psi=4, seed=0))
    cases = {
        "magic": b"NOPE" + raw[4:],
        "version": raw[:4] + struct.pack("<H", 9) + raw[6:],
        "kind": raw[:6] + bytes([7]) + raw[7:],
        "truncated": raw[:-5],
        "short": raw[:10],
    }
    for name, blob in cases.items():
        (tmp_path / name).write_bytes(blob)
        with pytest.raises(FormatError):
            load_model(tmp_path / name)


def test_build_model_unknown_kind(rng):
    with pytest.raises(ParameterError):
        build_model("kdtree", rng.normal(size=(5, 2)), t=2)


def test_fvecs_round_trip(tmp_path, rng):
    X = rng.normal(size=(17, 5)).astype(np.float32)
    write_fvecs(tmp_path / "x.fvecs", X)
    raw = (tmp_path / "x.fvecs").read_bytes()
    assert len(raw) == 17 * (4 + 20) and struct.unpack_from("<i", raw)[0] == 5
    assert np.array_equal(read_fvecs(tmp_path / "x.fvecs"), X)
    assert np.array_equal(read_vectors(tmp_path / "x.fvecs"), X)


def test_fvecs_errors(tmp_path):
    (tmp_path / "a.fvecs").write_bytes(struct.pack("<i3f", 3, 1, 2, 3) + struct.pack("<i2f", 2, 1, 2))
    with pytest.raises(FormatError):
        read_fvecs(tmp_path / "a.fvecs")
    (tmp_path / "b.fvecs").write_bytes(struct.pack("<i3f", 3, 1, 2, 3) + b"\x00\x00")
    with pytest.raises(FormatError):
        read_fvecs(tmp_path / "b.fvecs")
    (tmp_path / "e.fvecs").write_bytes(b"")
    assert read_fvecs(tmp_path / "e.fvecs").shape[0] == 0


def test_raw_with_sidecar(tmp_path, rng):
    X = rng.normal(size=(40, 6)).astype(np.float32)
    write_raw(tmp_path / "x.f32", X)
    assert (tmp_path / "x.f32.json").exists()
    assert np.array_equal(read_raw(tmp_path / "x.f32"), X)
    assert np.array_equal(read_vectors(tmp_path / "x.f32"), X)
    write_vectors(tmp_path / "y.fvecs", X)
    assert np.array_equal(read_vectors(tmp_path / "y.fvecs"), X)
    (tmp_path / "x.f32.json").write_text('{"n": 41, "d": 6}')
    with pytest.raises(FormatError):
        read_raw(tmp_path / "x.f32")
