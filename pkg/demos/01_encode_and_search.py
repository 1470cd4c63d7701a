"""Encode a synthetic corpus with isolation partitions and search it by match count."""

# %%
import numpy as np

from ike.codec import kernel_estimate, pack
from ike.datasets import clustered, cosine_topk
from ike.eval import recall_overlap
from ike.index import exhaustive_topk
from ike.models import build_model

X, Q = clustered(20_000, 64, n_clusters=40, n_queries=50, seed=0)
print("corpus", X.shape, "queries", Q.shape)

# %% [markdown]
# Each of the t trees is built on psi random points.  A point's code is the
# leaf it reaches in every tree, so psi=2 needs one bit per tree.

# %%
model = build_model("iforest", X, t=1024, psi=2, seed=0)
codes = model.encode(X)
print(f"t={codes.t} n_b={codes.n_b} bytes/point={codes.bytes_per_point} (float32: {4 * X.shape[1]})")

# %% [markdown]
# Similarity is the fraction of trees in which two points land in the same leaf.

# %%
idx = model.transform(X[:3])
print("leaf ids of point 0, first 12 trees:", idx[0, :12])
a, b = pack(idx[:1], codes.n_b).data[0], pack(idx[1:2], codes.n_b).data[0]
print("kernel(0, 0) =", kernel_estimate(a, a, codes.t, codes.n_b))
print("kernel(0, 1) =", round(kernel_estimate(a, b, codes.t, codes.n_b), 3))

# %%
res = exhaustive_topk(codes, model.encode(Q).data, k=10)
truth = cosine_topk(X, Q, 10)
print("recall@10 against float cosine:", round(recall_overlap(res.ids, truth), 3))
print("query 0 hits:", res.hits(0)[:5])

# %% [markdown]
# More trees means a finer estimate of the kernel, so recall rises with t.

# %%
for t in (64, 256, 1024):
    m = build_model("iforest", X, t=t, psi=2, seed=0)
    r = exhaustive_topk(m.encode(X), m.encode(Q).data, k=10)
    print(f"t={t:5d} recall@10={recall_overlap(r.ids, truth):.3f}")

# %% [markdown]
# The Voronoi variant draws psi anchors in m random dimensions instead of a tree.

# %%
vd = build_model("voronoi", X, t=1024, psi=2, m=8, seed=0)
r = exhaustive_topk(vd.encode(X), vd.encode(Q).data, k=10)
print("voronoi m=8 recall@10:", round(recall_overlap(r.ids, truth), 3))
print("rows equal after re-encode:", np.array_equal(vd.transform(X[:100]), vd.transform(X[:100])))
