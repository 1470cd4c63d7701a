import numpy as np
import pytest

from ike.core import IkeParams, ParameterError
from ike.voronoi import VdModel, build_vd, map_point_vd

from conftest import naive_nearest


def test_full_dimension_model_uses_every_dim(rng):
    X = rng.normal(size=(100, 6)).astype(np.float32)
    model = build_vd(X, IkeParams(t=10, psi=4, seed=0))
    assert model.m == 6
    assert all(np.array_equal(p.dims, np.arange(6)) for p in model.partitions)


def test_subspace_dims_distinct_sorted(rng):
    X = rng.normal(size=(100, 20)).astype(np.float32)
    model = build_vd(X, IkeParams(t=50, psi=4, seed=0, m=5))
    for p in model.partitions:
        assert len(set(p.dims.tolist())) == 5 and np.all(np.diff(p.dims) > 0)
        assert p.anchors.shape == (4, 5)


def test_anchor_maps_to_itself(rng):
    X = rng.normal(size=(64, 5)).astype(np.float32)
    model = build_vd(X, IkeParams(t=30, psi=8, seed=3, m=3))
    for i, p in enumerate(model.partitions):
        for j in range(8):
            x = np.zeros(5, dtype=np.float32)
            x[p.dims] = p.anchors[j]
            assert map_point_vd(model, x)[i] == j


def test_one_dim_nearest_anchor():
    dims = np.array([[2]], dtype=np.int32)
    anchors = np.array([[[0.0], [10.0]]], dtype=np.float32)
    model = VdModel(dims, anchors, IkeParams(t=1, psi=2, m=1), d=4)
    assert map_point_vd(model, np.array([9.0, 9.0, 2.0, 9.0]))[0] == 0
    assert map_point_vd(model, np.array([0.0, 0.0, 7.0, 0.0]))[0] == 1
    # equidistant: lowest anchor index wins
    assert map_point_vd(model, np.array([0.0, 0.0, 5.0, 0.0]))[0] == 0


@pytest.mark.parametrize("m", [1, 3, 8])
def test_brute_force_oracle(rng, m):
    X = rng.normal(size=(300, 8)).astype(np.float32)
    model = build_vd(X, IkeParams(t=12, psi=5, seed=m, m=m))
    P = rng.normal(size=(1000, 8)).astype(np.float32)
    got = model.transform(P)
    for i, part in enumerate(model.partitions):
        want = [naive_nearest(x, part.dims, part.anchors) for x in P]
        assert got[:, i].tolist() == want


def test_full_dim_equals_vdeh_assignment(rng):
    X = rng.normal(size=(200, 4)).astype(np.float32)
    model = build_vd(X, IkeParams(t=5, psi=6, seed=1))
    P = rng.normal(size=(100, 4)).astype(np.float32)
    for i, part in enumerate(model.partitions):
        d2 = ((P[:, None, :].astype(np.float64) - part.anchors[None].astype(np.float64)) ** 2).sum(-1)
        assert np.array_equal(model.transform(P)[:, i], d2.argmin(1))


def test_determinism_and_errors(rng):
    X = rng.normal(size=(50, 6)).astype(np.float32)
    p = IkeParams(t=20, psi=3, seed=9, m=2)
    assert build_vd(X, p) == build_vd(X, p)
    with pytest.raises(ParameterError):
        build_vd(X, IkeParams(t=2, psi=3, m=7))
    with pytest.raises(ParameterError):
        build_vd(X, IkeParams(t=2, psi=51))
    with pytest.raises(ParameterError, match="d=6"):
        build_vd(X, p).transform(np.zeros((1, 5)))
