"""Statistical behaviour of the partition ensembles: entropy, bit correlation, diversity."""

# %%
import numpy as np

from ike.datasets import uniform
from ike.properties import check_bit_independence, check_entropy, estimate_rho, variance_shrinkage

X = uniform(20_000, 8, seed=0)

# %% [markdown]
# A height-limited tree with psi=4 has at most 4 leaves.  Per tree the leaf
# distribution is uneven; pooled over trees it is nearly uniform.

# %%
rep = check_entropy("iforest", X, psi=4, trees=100)
print({k: round(v, 3) for k, v in rep.items() if k.endswith("entropy")})

# %% [markdown]
# Bits of one leaf id are tied to each other by the tree shape.  Bits of
# different trees are independent once each point's own mean is removed.
# That estimate averages over tree pairs, so its noise shrinks like 1/sqrt(trees).

# %%
rep = check_bit_independence("iforest", X, psi=4, trees=500)
print("within", round(rep["within_mean_abs_corr"], 3), "between", round(rep["between_abs_corr"], 4))

# %% [markdown]
# rho is the correlation between two partitions' same-cell indicators.
# Lower rho means the ensemble average keeps improving with more partitions.

# %%
U = uniform(5000, 16, seed=1)
pairs = np.random.default_rng(1).permutation(5000)[:200].reshape(100, 2)
for kind, m in (("voronoi", 16), ("voronoi", 1), ("iforest", None)):
    est = estimate_rho(kind, U, pairs, t=500, psi=2, m=m)
    print(f"{kind:8s} m={m}: rho={est.rho:.4f} +/- {est.stderr:.4f}")

# %%
rep = variance_shrinkage("iforest", U, pairs[:30], t_small=50, t_large=500, models=20)
print(f"variance across seeds: t=50 {rep['var_small']:.2e}  t=500 {rep['var_large']:.2e}")
