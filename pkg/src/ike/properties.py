"""Statistical experiments on partitioner ensembles.

* :func:`check_entropy`: how evenly points spread over each partition's cells.
* :func:`check_bit_independence`: correlation between code bits, inside one
  partition and across partitions.
* :func:`estimate_rho`: correlation between the same-cell indicators of
  different partitions, measured across a set of point pairs.
* :func:`variance_shrinkage`: spread of the kernel estimate across seeds as
  the ensemble grows.

Every function returns a plain dict (or :class:`DiversityEstimate`) holding
the raw numbers next to the pass/fail verdict, so thresholds can be audited.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import ParameterError, derive_nb
from .models import build_model

__all__ = [
    "DiversityEstimate",
    "partition_entropies",
    "check_entropy",
    "check_bit_independence",
    "indicator_matrix",
    "rho_from_indicators",
    "estimate_rho",
    "variance_shrinkage",
]


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-(p * np.log2(p)).sum())


def partition_entropies(indices: np.ndarray) -> np.ndarray:
    """Empirical cell-distribution entropy (bits) of every column of an ``n x t`` index matrix."""
    return np.array([_entropy(np.bincount(col, minlength=2)) for col in indices.T])


def check_entropy(kind: str, data, psi: int, trees: int = 500, eval_points=None,
                  m: int | None = None, seed: int = 0, fraction: float = 0.95) -> dict:
    """Average per-partition entropy against ``fraction * log2(psi)``.

    The model is built on ``data`` and evaluated on ``eval_points`` (default:
    ``data``).  The entropy of the cell distribution pooled over all
    partitions is reported too; it is the quantity that equals ``log2(psi)``
    when every cell is hit with probability ``1/psi`` on average over the
    partition randomness.
    """
    X = np.asarray(data, dtype=np.float32)
    E = X if eval_points is None else np.asarray(eval_points, dtype=np.float32)
    model = build_model(kind, X, t=trees, psi=psi, m=m, seed=seed)
    idx = model.transform(E)
    per = partition_entropies(idx)
    pooled = _entropy(np.bincount(idx.ravel(), minlength=psi))
    target = fraction * np.log2(psi)
    spread = float(np.ptp(X)) if X.size else 0.0
    return {
        "check": "entropy",
        "kind": kind,
        "psi": psi,
        "partitions": trees,
        "eval_points": int(E.shape[0]),
        "mean_entropy": float(per.mean()),
        "min_entropy": float(per.min()),
        "pooled_entropy": pooled,
        "max_entropy": float(np.log2(psi)),
        "threshold": float(target),
        "passed": bool(per.mean() >= target),
        "degenerate_data": spread == 0.0,
    }


def _abs_corr_columns(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, int]:
    """|Pearson r| between matching columns of two 0/1 matrices; constant columns dropped."""
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    sa = a.std(0)
    sb = b.std(0)
    ok = (sa > 0) & (sb > 0)
    cov = ((a - a.mean(0)) * (b - b.mean(0))).mean(0)
    r = np.abs(cov[ok] / (sa[ok] * sb[ok]))
    return r, int((~ok).sum())


def _conditional_lag_corr(bits: np.ndarray) -> float:
    """Pooled lag-1 correlation across partitions after removing each point's mean."""
    c = bits.astype(np.float64)
    c -= c.mean(axis=1, keepdims=True)
    a, b = c[:, :-1], c[:, 1:]
    den = np.sqrt((a * a).sum() * (b * b).sum())
    return float((a * b).sum() / den) if den > 0 else 0.0


def check_bit_independence(kind: str, data, psi: int = 4, trees: int = 100, eval_points=None,
                           m: int | None = None, seed: int = 0, threshold: float = 0.05) -> dict:
    """Correlation of code bits within each partition and between neighbouring partitions.

    Within a partition: mean over partitions of |Pearson r| between every bit
    pair of the ``n_b``-bit cell index, over the evaluation points.
    Partitions whose bits are constant on those points carry no correlation
    and are excluded (and counted).

    Between partitions: bit ``b`` of partition ``j`` against bit ``b`` of
    partition ``j + 1``, conditional on the point.  Each point's bits are
    centred on that point's mean over partitions before pooling, so the
    statistic measures dependence created by the partitions themselves; it is
    zero in expectation for independently drawn partitions whatever the data.
    The unconditional per-pair mean |r| (which also picks up how the cell
    probabilities vary across the data) is reported alongside.
    """
    X = np.asarray(data, dtype=np.float32)
    E = X if eval_points is None else np.asarray(eval_points, dtype=np.float32)
    nb = derive_nb(psi)
    if nb < 2:
        raise ParameterError("bit independence inside a partition needs psi >= 3")
    model = build_model(kind, X, t=trees, psi=psi, m=m, seed=seed)
    idx = model.transform(E)
    bits = [(idx >> b) & 1 for b in range(nb)]
    within, excluded_within = [], 0
    for b1 in range(nb):
        for b2 in range(b1 + 1, nb):
            r, ex = _abs_corr_columns(bits[b1], bits[b2])
            within.append(r)
            excluded_within += ex
    between, excluded_between, conditional = [], 0, []
    for b in range(nb):
        r, ex = _abs_corr_columns(bits[b][:, :-1], bits[b][:, 1:])
        between.append(r)
        excluded_between += ex
        conditional.append(_conditional_lag_corr(bits[b]))
    within = np.concatenate(within) if within else np.empty(0)
    between = np.concatenate(between) if between else np.empty(0)
    pooled = _abs_corr_columns(bits[0].reshape(-1, 1), bits[1].reshape(-1, 1))[0]
    report = {
        "check": "bit_independence",
        "kind": kind,
        "psi": psi,
        "partitions": trees,
        "eval_points": int(E.shape[0]),
        "within_mean_abs_corr": float(within.mean()) if within.size else None,
        "within_excluded": excluded_within,
        "pooled_within_abs_corr": float(pooled[0]) if pooled.size else None,
        "between_abs_corr": float(max(abs(c) for c in conditional)),
        "between_pair_mean_abs_corr": float(between.mean()) if between.size else None,
        "between_excluded": excluded_between,
        "threshold": threshold,
    }
    if not within.size:
        report["message"] = "all partitions produce constant bits on these points (e.g. identical points); nothing to correlate"
        report["passed"] = None
    else:
        report["within_passed"] = bool(report["within_mean_abs_corr"] <= threshold)
        report["between_passed"] = bool(report["between_abs_corr"] <= threshold)
        report["passed"] = report["within_passed"] and report["between_passed"]
    return report


@dataclass
class DiversityEstimate:
    """Inter-partition correlation of same-cell indicators, with a jackknife standard error."""

    rho: float
    stderr: float
    config: dict = field(default_factory=dict)
    saturated_pairs: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def indicator_matrix(indices: np.ndarray, pairs: np.ndarray) -> np.ndarray:
    """``Z[p, i] = 1`` when both points of pair ``p`` share a cell in partition ``i``."""
    pairs = np.asarray(pairs)
    return (indices[pairs[:, 0]] == indices[pairs[:, 1]]).astype(np.float64)


def rho_from_indicators(Z: np.ndarray) -> float:
    """Average inter-partition covariance over average per-partition variance.

    Covariances are taken across pairs.  The sum of all ``t(t-1)`` off-diagonal
    covariances comes from the sample variance of the per-pair mean::

        t^2 Var(mean_i Z_i) = sum_i Var(Z_i) + sum_{i != j} Cov(Z_i, Z_j)
    """
    P, t = Z.shape
    if P < 2 or t < 2:
        raise ParameterError("need at least 2 pairs and 2 partitions")
    var_i = Z.var(axis=0, ddof=1)
    sigma2 = var_i.mean()
    if sigma2 <= 0:
        return float("nan")
    var_mean = Z.mean(axis=1).var(ddof=1)
    cov = (t * t * var_mean - var_i.sum()) / (t * (t - 1))
    return float(cov / sigma2)


def _jackknife(Z: np.ndarray) -> tuple[float, float]:
    P = Z.shape[0]
    full = rho_from_indicators(Z)
    loo = np.array([rho_from_indicators(np.delete(Z, p, axis=0)) for p in range(P)])
    se = float(np.sqrt((P - 1) / P * ((loo - loo.mean()) ** 2).sum()))
    return full, se


def estimate_rho(kind: str, data, pairs, t: int = 2000, psi: int = 2, m: int | None = None,
                 seed: int = 0, indices: np.ndarray | None = None) -> DiversityEstimate:
    """Correlation between partitions' same-cell indicators over ``pairs`` (``P x 2`` row ids).

    Pass ``indices`` (``n x t``) to score a precomputed ensemble instead of
    building one.  Pairs whose indicator is constant over every partition are
    counted as saturated; they stay in the estimate.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ParameterError("pairs must be a P x 2 array of row ids")
    if pairs.shape[0] < 30:
        raise ParameterError(f"need at least 30 pairs, got {pairs.shape[0]}")
    if indices is None:
        if t < 2:
            raise ParameterError("need at least 2 partitions")
        model = build_model(kind, data, t=t, psi=psi, m=m, seed=seed)
        rows = np.unique(pairs)
        indices = np.zeros((rows.max() + 1, t), dtype=np.uint8)
        indices[rows] = model.transform(np.asarray(data, dtype=np.float32)[rows])
    Z = indicator_matrix(indices, pairs)
    saturated = int(((Z.min(1) == Z.max(1))).sum())
    rho, se = _jackknife(Z)
    d = np.asarray(data).shape[1] if data is not None else None
    config = {"kind": kind, "m": m, "psi": psi, "t": int(Z.shape[1]), "d": d, "pairs": int(Z.shape[0])}
    return DiversityEstimate(rho, se, config, saturated)


def variance_shrinkage(kind: str, data, pairs, t_small: int = 200, t_large: int = 2000,
                       models: int = 50, psi: int = 2, m: int | None = None, seed: int = 0) -> dict:
    """Variance across ``models`` seeds of the kernel estimate at two ensemble sizes.

    Partition ``i`` depends only on ``(seed, i)``, so the small ensemble is
    the first ``t_small`` partitions of the large one.
    """
    pairs = np.asarray(pairs, dtype=np.int64)
    X = np.asarray(data, dtype=np.float32)
    rows = np.unique(pairs)
    small, large = [], []
    for r in range(models):
        model = build_model(kind, X, t=t_large, psi=psi, m=m, seed=seed + r)
        idx = np.zeros((rows.max() + 1, t_large), dtype=np.uint8)
        idx[rows] = model.transform(X[rows])
        Z = indicator_matrix(idx, pairs)
        small.append(Z[:, :t_small].mean(1))
        large.append(Z.mean(1))
    var_small = np.var(np.array(small), axis=0, ddof=1)
    var_large = np.var(np.array(large), axis=0, ddof=1)
    return {
        "check": "variance_shrinkage",
        "kind": kind,
        "t_small": t_small,
        "t_large": t_large,
        "models": models,
        "var_small": float(var_small.mean()),
        "var_large": float(var_large.mean()),
        "per_pair_var_small": var_small.tolist(),
        "per_pair_var_large": var_large.tolist(),
        "passed": bool(var_large.mean() < var_small.mean()),
    }
