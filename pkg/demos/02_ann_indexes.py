"""HNSW and IVF indexes over packed codes, compared with the exhaustive scan."""

# %%
import time

from ike.datasets import clustered
from ike.eval import recall_overlap
from ike.index import exhaustive_topk, hnsw_build, hnsw_search, ivf_build, ivf_search
from ike.models import build_model

X, Q = clustered(30_000, 64, n_clusters=50, n_queries=200, seed=1)
model = build_model("iforest", X, t=256, psi=2, seed=1)
codes = model.encode(X)
qc = model.encode(Q).data
exact = exhaustive_topk(codes, qc, k=10).ids

# %% [markdown]
# HNSW links codes by match count.  Larger ef_search explores more of the
# graph: slower, closer to the exhaustive answer.

# %%
t0 = time.perf_counter()
graph = hnsw_build(codes, M=16, ef_construction=200, seed=1)
print(f"hnsw build {time.perf_counter() - t0:.1f}s")
for ef in (16, 32, 64, 128):
    t0 = time.perf_counter()
    ids = hnsw_search(graph, qc, 10, ef).ids
    dt = time.perf_counter() - t0
    print(f"ef={ef:4d} recall={recall_overlap(ids, exact):.3f} qps={len(Q) / dt:8.0f}")

# %% [markdown]
# IVF clusters the float vectors with k-means, probes the nearest cells and
# ranks their members by match count.  nprobe=nlist is the exhaustive scan.

# %%
ivf = ivf_build(X, codes, seed=1)
print("nlist", ivf.nlist)
for nprobe in (1, 4, 16, ivf.nlist):
    ids = ivf_search(ivf, Q, qc, 10, nprobe).ids
    print(f"nprobe={nprobe:4d} recall={recall_overlap(ids, exact):.3f}")
