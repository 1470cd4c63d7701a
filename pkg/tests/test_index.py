import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ike.codec import pack
from ike.core import EncodingError, FormatError, IkeParams, ParameterError
from ike.datasets import clustered
from ike.iforest import build_forest
from ike.index import (
    default_nlist,
    exhaustive_topk,
    hnsw_build,
    hnsw_search,
    ivf_build,
    ivf_search,
    kmeans,
    load_hnsw,
    load_ivf,
    save_hnsw,
    save_ivf,
    topk,
)
from ike.index.ivf import nearest_centroid

from conftest import sort_topk


def overlap(a, b, k):
    return np.mean([len(set(x[:k].tolist()) & set(y[:k].tolist())) / k for x, y in zip(a, b)])


@pytest.fixture(scope="module")
def corpus():
    X, Q = clustered(3000, 32, n_clusters=20, intrinsic_dim=4, n_queries=100, seed=3)
    forest = build_forest(X, IkeParams(t=256, psi=2, seed=0))
    return X, Q, forest.encode(X), forest.encode(Q)


@given(arrays(np.int64, st.integers(1, 200), elements=st.integers(0, 8)), st.integers(1, 50))
def test_topk_sort_oracle(scores, k):
    ids, sc = topk(scores, k)
    want = sort_topk(scores, k)
    assert ids.tolist() == want
    assert sc.tolist() == [int(scores[i]) for i in want]


def test_exhaustive_sort_oracle(rng):
    idx = rng.integers(0, 4, size=(10_000, 100))
    codes = pack(idx, 2)
    qidx = rng.integers(0, 4, size=(100, 100))
    res = exhaustive_topk(codes, pack(qidx, 2), k=10)
    for q in range(100):
        counts = (idx == qidx[q]).sum(1)
        assert res.ids[q].tolist() == sort_topk(counts, 10)
        assert res.scores[q].tolist() == sorted(counts.tolist(), reverse=True)[:10]


def test_exhaustive_identity_and_total_order(rng):
    codes = pack(rng.integers(0, 2, size=(50, 64)), 1)
    res = exhaustive_topk(codes, codes.data[17], k=50)
    assert res.ids[0, 0] == 17 and res.scores[0, 0] == 64
    assert sorted(res.ids[0].tolist()) == list(range(50))
    with pytest.warns(UserWarning, match="clamped"):
        assert exhaustive_topk(codes, codes.data[0], k=80).ids.shape == (1, 50)
    with pytest.raises(ParameterError):
        exhaustive_topk(codes, codes.data[0], k=0)
    with pytest.raises(EncodingError):
        exhaustive_topk(codes, pack(np.zeros((1, 64), dtype=np.uint8), 2))


def test_hnsw_single_node():
    codes = pack([[1, 0, 1]], 1)
    index = hnsw_build(codes, M=4, ef_construction=8)
    with pytest.warns(UserWarning):
        res = hnsw_search(index, pack([[0, 0, 0]], 1), k=5, ef_search=5)
    assert res.ids[0].tolist() == [0] and res.scores[0].tolist() == [1]


def test_hnsw_structure(corpus):
    _, _, codes, _ = corpus
    index = hnsw_build(codes, M=8, ef_construction=64, seed=1)
    assert (index.cnt0 <= 16).all() and (index.cnt0 > 0).all()
    for node in range(0, codes.n, 97):
        for layer in range(1, index.levels[node] + 1):
            nb = index.neighbors(node, layer)
            assert len(nb) <= 8
            assert (index.levels[nb] >= layer).all()
        assert node not in index.neighbors(node, 0).tolist()


def test_hnsw_recall_and_self_retrieval(corpus):
    _, _, codes, qcodes = corpus
    index = hnsw_build(codes, M=16, ef_construction=200, seed=0)
    truth = exhaustive_topk(codes, qcodes, 10).ids
    recalls = [overlap(hnsw_search(index, qcodes, 10, ef).ids, truth, 10) for ef in (16, 32, 64, 128, 256)]
    assert recalls[2] >= 0.9
    assert all(b >= a - 0.01 for a, b in zip(recalls, recalls[1:])) and recalls[-1] >= recalls[0]
    res = hnsw_search(index, codes[:50], 10, 32)
    assert (res.scores[:, 0] == codes.t).all()
    with pytest.raises(ParameterError):
        hnsw_search(index, qcodes, 10, 5)


def test_hnsw_small_graph_ef_n_is_exhaustive(rng):
    X, Q = clustered(800, 16, n_clusters=8, n_queries=50, seed=1)
    f = build_forest(X, IkeParams(t=128, psi=4, seed=2))
    codes, qc = f.encode(X), f.encode(Q)
    index = hnsw_build(codes, M=8, ef_construction=100)
    res = hnsw_search(index, qc, 10, ef_search=800)
    truth = exhaustive_topk(codes, qc, 10)
    # tie-aware: every returned score reaches the exhaustive 10th score
    assert overlap(res.ids, truth.ids, 10) >= 0.99 or (res.scores >= truth.scores[:, -1:]).mean() >= 0.99


def test_hnsw_deterministic(corpus):
    _, _, codes, _ = corpus
    a = hnsw_build(codes[:500], M=8, ef_construction=50, seed=3)
    b = hnsw_build(codes[:500], M=8, ef_construction=50, seed=3)
    assert np.array_equal(a.nbr0, b.nbr0) and np.array_equal(a.up_nbr, b.up_nbr)


def test_kmeans_and_assignment_oracle(corpus):
    X = corpus[0]
    C = kmeans(X, 16, iters=10, seed=0)
    lab = nearest_centroid(X, C)
    d2 = ((X[:, None, :].astype(np.float64) - C[None].astype(np.float64)) ** 2).sum(-1)
    assert np.array_equal(lab, d2.argmin(1))
    assert np.array_equal(C, kmeans(X, 16, iters=10, seed=0))


def test_kmeans_handles_duplicates():
    X = np.repeat(np.eye(3, dtype=np.float32), 10, axis=0)
    C = kmeans(X, 5, iters=5, seed=0)
    assert C.shape == (5, 3) and np.isfinite(C).all()


def test_ivf_partition_and_equivalence(corpus):
    X, Q, codes, qcodes = corpus
    index = ivf_build(X, codes, nlist=32, seed=0)
    assert sorted(index.ids.tolist()) == list(range(codes.n))
    assert index.offsets[-1] == codes.n
    ex = exhaustive_topk(codes, qcodes, 10)
    full = ivf_search(index, Q, qcodes, 10, nprobe=32)
    assert np.array_equal(full.ids, ex.ids) and np.array_equal(full.scores, ex.scores)
    with pytest.warns(UserWarning, match="clamped"):
        ivf_search(index, Q[:1], qcodes[:1], 10, nprobe=99)


def test_ivf_nprobe_one_stays_in_nearest_list(corpus):
    X, Q, codes, qcodes = corpus
    index = ivf_build(X, codes, nlist=16, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = ivf_search(index, Q, qcodes, 10, nprobe=1)
    for q in range(Q.shape[0]):
        cell = index.probe(Q[q], 1)[0]
        members = set(index.list_ids(cell).tolist())
        assert set(res.ids[q][res.ids[q] >= 0].tolist()) <= members


def test_ivf_recall_monotone_in_nprobe(corpus):
    X, Q, codes, qcodes = corpus
    index = ivf_build(X, codes, nlist=32, seed=0)
    truth = exhaustive_topk(codes, qcodes, 10).ids
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rec = [overlap(ivf_search(index, Q, qcodes, 10, p).ids, truth, 10) for p in (1, 2, 4, 8, 16, 32)]
    assert all(b >= a for a, b in zip(rec, rec[1:]))
    assert rec[-1] == 1.0


def test_ivf_single_list_equals_exhaustive(corpus):
    X, Q, codes, qcodes = corpus
    index = ivf_build(X, codes, nlist=1)
    assert np.array_equal(ivf_search(index, Q, qcodes, 10, 1).ids, exhaustive_topk(codes, qcodes, 10).ids)
    with pytest.raises(ParameterError):
        ivf_build(X[:5], codes[:5], nlist=6)


def test_default_nlist():
    assert default_nlist(1_000_000) == 4096
    assert default_nlist(100_000) == 1024
    assert default_nlist(2) == 1


def test_index_files_round_trip(tmp_path, corpus):
    X, Q, codes, qcodes = corpus
    h = hnsw_build(codes[:400], M=8, ef_construction=40)
    save_hnsw(tmp_path / "h", h)
    h2 = load_hnsw(tmp_path / "h", codes[:400])
    assert np.array_equal(hnsw_search(h, qcodes, 10, 40).ids, hnsw_search(h2, qcodes, 10, 40).ids)
    assert (tmp_path / "h").read_bytes()[:4] == b"IKEH"
    v = ivf_build(X, codes, nlist=8)
    save_ivf(tmp_path / "v", v)
    v2 = load_ivf(tmp_path / "v", codes)
    assert np.array_equal(v.centroids, v2.centroids) and np.array_equal(v.ids, v2.ids)
    with pytest.raises(FormatError):
        load_hnsw(tmp_path / "v", codes)
    with pytest.raises(FormatError):
        load_ivf(tmp_path / "h", codes)
    with pytest.raises(FormatError):
        load_hnsw(tmp_path / "h", codes)
