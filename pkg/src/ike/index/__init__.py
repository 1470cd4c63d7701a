"""Search strategies over packed codes: exhaustive scan, HNSW graph, IVF cells."""

from ._common import SearchResult, topk
from .exhaustive import exhaustive_topk
from .hnsw import HnswIndex, hnsw_build, hnsw_search, load_hnsw, save_hnsw
from .ivf import IvfIndex, default_nlist, ivf_build, ivf_search, kmeans, load_ivf, save_ivf

__all__ = [
    "SearchResult",
    "topk",
    "exhaustive_topk",
    "HnswIndex",
    "hnsw_build",
    "hnsw_search",
    "save_hnsw",
    "load_hnsw",
    "IvfIndex",
    "default_nlist",
    "ivf_build",
    "ivf_search",
    "kmeans",
    "save_ivf",
    "load_ivf",
]
