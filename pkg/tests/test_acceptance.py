"""Acceptance criteria, one test each.  Every test records a PASS/FAIL line in the run summary.

The statistical thresholds below are the stated ones; a failing line is a
measured result, not a flaky test.  Run only this module with
``pytest tests/test_acceptance.py -v -s``.
"""

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, naive_matches, sort_topk
from ike.bench import paired_scan
from ike.codec import bytes_per_point, compression_ratio, match_count, pack, scan, scan_pairs
from ike.core import derive_nb
from ike.datasets import clustered, cosine_topk, uniform
from ike.eval import mrr_at_k, ndcg_at_k, recall_overlap
from ike.index import exhaustive_topk, hnsw_build, hnsw_search, ivf_build, ivf_search
from ike.models import build_model
from ike.properties import check_bit_independence, check_entropy, estimate_rho, variance_shrinkage
from ike.vectors import write_fvecs

pytestmark = pytest.mark.acceptance


def record(tag: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {tag} {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def test_c1_codec_exactness():
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    bad = total = 0
    configs = [(nb, t) for nb in (1, 2, 4, 8) for t in (7, 64, 1000, 4096)]
    per = 100_000 // len(configs)
    for nb, t in configs:
        a = rng.integers(0, 1 << nb, size=(per, t), dtype=np.uint8)
        b = a.copy()
        # vary the agreement rate so counts cover the whole range
        flip = rng.random((per, t)) < rng.random((per, 1))
        b[flip] = rng.integers(0, 1 << nb, size=int(flip.sum()), dtype=np.uint8)
        pa, pb = pack(a, nb), pack(b, nb)
        got = scan_pairs(pa, pb)
        want = (a == b).sum(1)
        bad += int((got != want).sum())
        total += per
        # spot-check the scalar path against the loop oracle
        for i in range(5):
            bad += int(match_count(pa.data[i], pb.data[i], t, nb) != naive_matches(a[i], b[i]))
    ex = [0, 1, 2, 1], [0, 2, 3, 1]
    worked = match_count(pack(np.array([ex[0]], np.uint8), 2).data[0],
                         pack(np.array([ex[1]], np.uint8), 2).data[0], 4, 2)
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and worked == 2 and elapsed < 60
    record("C1", ok, f"pairs={total} discrepancies={bad} worked_example={worked} runtime={elapsed:.1f}s")
    assert ok


def test_c2_storage_arithmetic():
    rng = np.random.default_rng(2)
    formula_ok = all(bytes_per_point(t, nb) == math.ceil(t * nb / 64) * 8
                     for t in rng.integers(1, 10_000, 200).tolist() for nb in (1, 2, 4, 8))
    c12 = compression_ratio(4096, derive_nb(12), 4096)
    c3 = compression_ratio(4096, derive_nb(3), 4096)
    packed = pack(np.zeros((3, 4096), np.uint8), derive_nb(12))
    ok = formula_ok and c12 == 8.0 and c3 == 16.0 and packed.bytes_per_point == 2048
    record("C2", ok, f"formula={formula_ok} psi12={c12}x psi3={c3}x")
    assert ok


def test_c3_exhaustive_and_ivf_exactness():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((10_000, 16)).astype(np.float32)
    model = build_model("iforest", X, t=64, psi=4, seed=3)
    codes = model.encode(X)
    Qf = rng.standard_normal((100, 16)).astype(np.float32)
    qc = model.encode(Qf)
    res = exhaustive_topk(codes, qc.data, k=10)
    mism = 0
    for q in range(100):
        s = scan(codes, qc.data[q])
        mism += int(res.ids[q].tolist() != sort_topk(s, 10))
    ivf = ivf_build(X, codes, nlist=32, seed=0)
    r2 = ivf_search(ivf, Qf, qc.data, k=10, nprobe=32)
    ivf_same = np.array_equal(r2.ids, res.ids) and np.array_equal(r2.scores, res.scores)
    ok = mism == 0 and ivf_same
    record("C3", ok, f"sort_oracle_mismatches={mism}/100 ivf_full_probe_identical={ivf_same}")
    assert ok


@pytest.mark.slow
def test_c4_entropy():
    t0 = time.perf_counter()
    rep = check_entropy("iforest", uniform(100_000, 8, seed=4), psi=4, trees=500, seed=4)
    elapsed = time.perf_counter() - t0
    ok = rep["passed"] and elapsed < 120
    record("C4", ok, f"mean_entropy={rep['mean_entropy']:.4f} threshold={rep['threshold']:.2f} "
                     f"pooled={rep['pooled_entropy']:.4f} runtime={elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c5_bit_independence():
    t0 = time.perf_counter()
    rep = check_bit_independence("iforest", uniform(100_000, 8, seed=4), psi=4, trees=500, seed=4)
    elapsed = time.perf_counter() - t0
    ok = rep["passed"] and elapsed < 120
    record("C5", ok, f"within={rep['within_mean_abs_corr']:.4f} between={rep['between_abs_corr']:.4f} "
                     f"(unconditional pair mean {rep['between_pair_mean_abs_corr']:.4f}) "
                     f"threshold={rep['threshold']} runtime={elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c6_diversity_ordering():
    t0 = time.perf_counter()
    X = uniform(10_000, 16, seed=6)
    pairs = np.random.default_rng(6).permutation(10_000)[:200].reshape(100, 2)
    vdeh = estimate_rho("voronoi", X, pairs, t=2000, psi=2, m=16, seed=6)
    vd1 = estimate_rho("voronoi", X, pairs, t=2000, psi=2, m=1, seed=6)
    itf = estimate_rho("iforest", X, pairs, t=2000, psi=2, seed=6)
    elapsed = time.perf_counter() - t0
    gap1 = vdeh.rho - vd1.rho > 2 * math.hypot(vdeh.stderr, vd1.stderr)
    gap2 = vd1.rho - itf.rho > 2 * math.hypot(vd1.stderr, itf.stderr)
    floor = itf.rho >= -3 * itf.stderr
    ok = gap1 and gap2 and floor and elapsed < 300
    # right order with gaps inside 2 SE is labelled inconclusive; it still fails the stated criterion
    ordered = vdeh.rho > vd1.rho > itf.rho
    verdict = "separated" if gap1 and gap2 else ("inconclusive" if ordered else "reversed")
    record("C6", ok, f"rho_VDeH={vdeh.rho:.4f}±{vdeh.stderr:.4f} rho_VD1={vd1.rho:.4f}±{vd1.stderr:.4f} "
                     f"rho_iF={itf.rho:.4f}±{itf.stderr:.4f} ordering={verdict} floor={floor} "
                     f"runtime={elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c7_variance_shrinkage():
    X = uniform(2000, 16, seed=7)
    pairs = np.random.default_rng(7).permutation(2000)[:60].reshape(30, 2)
    parts, ok = [], True
    for kind, m in (("iforest", None), ("voronoi", 16), ("voronoi", 1)):
        rep = variance_shrinkage(kind, X, pairs, t_small=200, t_large=2000, models=50, psi=2, m=m, seed=7)
        ok &= rep["passed"]
        parts.append(f"{kind}(m={m}): {rep['var_small']:.2e}->{rep['var_large']:.2e}")
    record("C7", ok, " ".join(parts))
    assert ok


@pytest.mark.slow
def test_c8_retrieval_fidelity_trend():
    t0 = time.perf_counter()
    X, Q = clustered(100_000, 128, n_clusters=100, n_queries=100, seed=8)
    truth = cosine_topk(X, Q, 10)
    recalls = {}
    for t in (256, 1024, 4096):
        model = build_model("iforest", X, t=t, psi=2, seed=8)
        res = exhaustive_topk(model.encode(X), model.encode(Q).data, k=10)
        recalls[t] = recall_overlap(res.ids, truth, k=10)
    elapsed = time.perf_counter() - t0
    vals = [recalls[t] for t in (256, 1024, 4096)]
    ok = all(a <= b for a, b in zip(vals, vals[1:])) and vals[-1] >= 0.7 and elapsed < 600
    record("C8", ok, " ".join(f"t={t}:{r:.3f}" for t, r in recalls.items()) + f" runtime={elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_c9_ann_fidelity():
    X, Q = clustered(100_000, 128, n_clusters=100, n_queries=200, seed=9)
    model = build_model("iforest", X, t=256, psi=2, seed=9)
    codes = model.encode(X)
    qc = model.encode(Q).data
    exact = exhaustive_topk(codes, qc, k=10).ids
    hnsw = hnsw_build(codes, M=32, ef_construction=500, seed=9)
    efs = (16, 32, 64, 128, 256)
    h = {ef: recall_overlap(hnsw_search(hnsw, qc, 10, ef).ids, exact) for ef in efs}
    ivf = ivf_build(X, codes, seed=9)
    probes = [p for p in (1, 2, 4, 8, 16, 32) if p <= ivf.nlist]
    v = {p: recall_overlap(ivf_search(ivf, Q, qc, 10, p).ids, exact) for p in probes}
    h_mono = all(h[a] <= h[b] for a, b in zip(efs, efs[1:]))
    v_mono = all(v[a] <= v[b] for a, b in zip(probes, probes[1:]))
    r100 = recall_overlap(hnsw_search(hnsw, qc, 10, 100).ids, exact)
    ok = r100 >= 0.9 and h_mono and v_mono
    record("C9", ok, f"hnsw@ef100={r100:.3f} ef_curve={[round(h[e], 3) for e in efs]} "
                     f"ivf_curve(nlist={ivf.nlist})={[round(v[p], 3) for p in probes]}")
    assert ok


@pytest.mark.slow
def test_c10_throughput():
    rep = paired_scan(n=100_000, d=1024, queries=20, runs=5)
    ok = rep["speedup"] >= 2.0
    m = rep["machine"]
    record("C10", ok, f"speedup={rep['speedup']:.2f}x bitwise={rep['bitwise_s']:.4f}s float={rep['float_s']:.4f}s "
                      f"threads=1 machine={m.get('processor')}/{m.get('cpu_count')}cpu")
    assert ok


def test_c11_metric_fixtures():
    def run_of(*docs):
        return [(d, float(len(docs) - i)) for i, d in enumerate(docs)]

    checks = [
        (mrr_at_k({"q": run_of("a", "b")}, {"q": {"a": 1}}), 1.0),
        (mrr_at_k({"q": run_of("x", "y", "z", "a")}, {"q": {"a": 1}}), 0.25),
        (mrr_at_k({"q": run_of(*"abcdefg")}, {"q": {"g": 1}}), 1 / 7),
        (mrr_at_k({"q": run_of(*"abcdefghijk")}, {"q": {"k": 1}}), 0.0),
        (ndcg_at_k({"q": run_of("a", "b")}, {"q": {"a": 2, "b": 1}}), 1.0),
        (ndcg_at_k({"q": run_of("x", "a")}, {"q": {"a": 1}}), 1 / math.log2(3)),
        # graded gains: dcg = 1 + 7/log2(3), idcg = 7 + 1/log2(3)
        (ndcg_at_k({"q": run_of("b", "a")}, {"q": {"a": 3, "b": 1}}),
         (1 + 7 / math.log2(3)) / (7 + 1 / math.log2(3))),
    ]
    worst = max(abs(got - want) for got, want in checks)
    ok = worst <= 1e-9
    record("C11", ok, f"fixtures={len(checks)} max_abs_error={worst:.2e}")
    assert ok


def _pipeline(tmp, corpus, threads: int, kind: str, extra: list[str]):
    env = dict(os.environ, IKE_THREADS=str(threads), NUMBA_NUM_THREADS="4")
    model, codes = tmp / f"{kind}-{threads}.model", tmp / f"{kind}-{threads}.codes"
    for args in (["build", "--corpus", corpus, "--kind", kind, "--t", "300", "--psi", "6", "--seed", "77",
                  "--out", model, *extra],
                 ["encode", "--model", model, "--vectors", corpus, "--out", codes]):
        subprocess.run([sys.executable, "-m", "ike.cli", *map(str, args)], env=env, check=True,
                       capture_output=True)
    return model.read_bytes(), codes.read_bytes()


@pytest.mark.slow
def test_c12_determinism(tmp_path):
    X = clustered(5000, 32, n_clusters=20, seed=12)
    write_fvecs(tmp_path / "corpus.fvecs", X)
    same = {}
    for kind, extra in (("iforest", []), ("voronoi", ["--m", "4"])):
        one = _pipeline(tmp_path, tmp_path / "corpus.fvecs", 1, kind, extra)
        many = _pipeline(tmp_path, tmp_path / "corpus.fvecs", 4, kind, extra)
        same[kind] = one == many
    ok = all(same.values())
    record("C12", ok, f"threads 1 vs 4 byte-identical: {same}")
    assert ok
