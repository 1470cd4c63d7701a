"""Synthetic corpora for experiments and tests."""

from __future__ import annotations

import numpy as np


def clustered(n: int, d: int = 128, n_clusters: int = 100, intrinsic_dim: int = 8,
              noise: float = 0.05, n_queries: int = 0, seed: int = 0):
    """Gaussian mixture whose components are low-rank (``intrinsic_dim``) plus small isotropic noise.

    Centres are standard normal; each component spreads along its own random
    ``d x intrinsic_dim`` basis scaled by ``1/sqrt(intrinsic_dim)``.  Queries are
    fresh draws from the same mixture.  Returns ``X`` or ``(X, Q)`` as float32.
    """
    rng = np.random.default_rng(seed)
    centres = rng.standard_normal((n_clusters, d)).astype(np.float32)
    bases = (rng.standard_normal((n_clusters, d, intrinsic_dim)) / np.sqrt(intrinsic_dim)).astype(np.float32)

    def draw(m: int) -> np.ndarray:
        lab = rng.integers(n_clusters, size=m)
        z = rng.standard_normal((m, intrinsic_dim)).astype(np.float32)
        out = centres[lab].copy()
        for c in np.unique(lab):
            rows = lab == c
            out[rows] += z[rows] @ bases[c].T
        out += noise * rng.standard_normal((m, d)).astype(np.float32)
        return out.astype(np.float32)

    X = draw(n)
    if n_queries:
        return X, draw(n_queries)
    return X


def uniform(n: int, d: int, seed: int = 0) -> np.ndarray:
    """Points uniform on ``[0, 1]^d`` with independent dimensions."""
    return np.random.default_rng(seed).random((n, d), dtype=np.float32)


def cosine_topk(X: np.ndarray, Q: np.ndarray, k: int = 10, chunk: int = 16384) -> np.ndarray:
    """Exact float cosine top-``k`` ids per query (ties to the lower id)."""
    Xn = X / np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1e-30)
    Qn = Q / np.maximum(np.linalg.norm(Q, axis=1, keepdims=True), 1e-30)
    sims = np.concatenate([Qn @ Xn[s : s + chunk].T for s in range(0, X.shape[0], chunk)], axis=1)
    order = np.lexsort((np.broadcast_to(np.arange(X.shape[0]), sims.shape), -sims), axis=1)
    return order[:, :k]
