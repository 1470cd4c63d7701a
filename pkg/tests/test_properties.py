"""Small-scale checks of the statistical harness; full-size runs live in the acceptance suite."""

import numpy as np
import pytest

from ike.core import ParameterError
from ike.datasets import uniform
from ike.properties import (
    check_bit_independence,
    check_entropy,
    estimate_rho,
    indicator_matrix,
    rho_from_indicators,
    variance_shrinkage,
)


def test_repeated_partition_gives_rho_one(rng):
    cells = rng.integers(0, 4, size=500)
    indices = np.repeat(cells[:, None], 50, axis=1).astype(np.uint8)
    pairs = rng.integers(0, 500, size=(200, 2))
    est = estimate_rho("fixed", None, pairs, indices=indices)
    assert est.rho == pytest.approx(1.0, abs=1e-9)
    assert est.saturated_pairs == 200


def test_independent_bernoulli_gives_rho_zero(rng):
    Z = (rng.random((300, 400)) < 0.4).astype(float)
    rho = rho_from_indicators(Z)
    P = Z.shape[0]
    loo = np.array([rho_from_indicators(np.delete(Z, p, 0)) for p in range(P)])
    se = np.sqrt((P - 1) / P * ((loo - loo.mean()) ** 2).sum())
    assert abs(rho) < 3 * se


def test_indicator_matrix():
    idx = np.array([[0, 1, 2], [0, 2, 2], [1, 1, 2]], dtype=np.uint8)
    Z = indicator_matrix(idx, np.array([[0, 1], [0, 2]]))
    assert Z.tolist() == [[1, 0, 1], [0, 1, 1]]


def test_rho_preconditions(rng):
    X = uniform(100, 4)
    with pytest.raises(ParameterError):
        estimate_rho("iforest", X, rng.integers(0, 100, size=(10, 2)), t=10)
    with pytest.raises(ParameterError):
        estimate_rho("iforest", X, rng.integers(0, 100, size=(40, 2)), t=1)


def test_rho_report_fields(rng):
    X = uniform(500, 4, seed=1)
    pairs = rng.integers(0, 500, size=(40, 2))
    est = estimate_rho("voronoi", X, pairs, t=200, psi=2, m=1, seed=0)
    assert -1 <= est.rho <= 1 and est.stderr > 0
    assert est.config == {"kind": "voronoi", "m": 1, "psi": 2, "t": 200, "d": 4, "pairs": 40}
    assert est.rho >= -3 * est.stderr


def test_entropy_psi2_one_dim():
    X = uniform(20_000, 1, seed=0)
    rep = check_entropy("iforest", X, 2, trees=100, seed=0)
    assert rep["max_entropy"] == 1.0 and rep["threshold"] == 0.95
    assert 0 < rep["mean_entropy"] <= 1.0 and rep["pooled_entropy"] > 0.95


def test_entropy_skewed_data_is_reported_not_asserted(rng):
    X = np.vstack([rng.normal(0, 0.01, size=(5000, 2)), [[100.0, 100.0]]]).astype(np.float32)
    rep = check_entropy("iforest", X, 4, trees=50)
    assert set(rep) >= {"mean_entropy", "pooled_entropy", "passed"}


def test_bit_independence_constant_data_message():
    X = np.ones((1000, 3), dtype=np.float32)
    rep = check_bit_independence("iforest", X, psi=4, trees=20)
    assert rep["passed"] is None and "identical" in rep["message"]


def test_bit_independence_requires_two_bits():
    with pytest.raises(ParameterError):
        check_bit_independence("iforest", uniform(100, 2), psi=2, trees=5)


def test_between_tree_bits_are_uncorrelated():
    rep = check_bit_independence("iforest", uniform(20_000, 8, seed=3), psi=4, trees=100, seed=3)
    assert rep["between_abs_corr"] <= 0.05


def test_variance_shrinks_small_scale(rng):
    X = uniform(300, 4, seed=2)
    pairs = rng.integers(0, 300, size=(10, 2))
    rep = variance_shrinkage("iforest", X, pairs, t_small=20, t_large=200, models=20)
    assert rep["var_large"] < rep["var_small"] and rep["passed"]
