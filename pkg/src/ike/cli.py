"""``ike`` command line: build, encode, index, search, tune, evaluate, benchmark.

Every subcommand writes one JSON object per line on stdout (machine readable)
and a short human summary on stderr.  All state lives in the named files.

Exit codes: 0 success, 2 parameter error, 3 I/O error, 4 format error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import parallel
from .codec import PackedCodes, compression_ratio, load_codes, save_codes, words_per_point
from .core import EncodingError, EvaluationError, FormatError, IkeError, ParameterError, stream, subsample
from .eval import machine_info, mrr_at_k, ndcg_at_k, read_qrels, read_run, run_from_result, write_run
from .index import (
    exhaustive_topk,
    hnsw_build,
    hnsw_search,
    ivf_build,
    ivf_search,
    load_hnsw,
    load_ivf,
    save_hnsw,
    save_ivf,
)
from .models import KINDS, build_model, load_model, save_model
from .vectors import read_vectors

EXIT_OK, EXIT_PARAM, EXIT_IO, EXIT_FORMAT = 0, 2, 3, 4

_SAMPLE_PURPOSE = 5


def _emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True), flush=True)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _table(rows: list[tuple[str, object]]) -> None:
    w = max(len(k) for k, _ in rows)
    for k, v in rows:
        _say(f"  {k:<{w}}  {v}")


def _vectors(path, d: int | None = None) -> np.ndarray:
    X = read_vectors(path)
    if X.shape[0] == 0 and d is not None:
        return np.empty((0, d), dtype=np.float32)
    if d is not None and X.shape[1] != d:
        raise ParameterError(f"dimension mismatch: model has d={d}, {path} has d={X.shape[1]}")
    return np.ascontiguousarray(X, dtype=np.float32)


def _ids(path, n: int) -> list[str]:
    if path is None:
        return [str(i) for i in range(n)]
    ids = Path(path).read_text(encoding="utf-8").split()
    if len(ids) != n:
        raise ParameterError(f"{path} lists {len(ids)} ids, expected {n}")
    return ids


def _codes_match(model, codes: PackedCodes) -> None:
    if codes.t != model.t or codes.n_b != model.n_b:
        raise ParameterError(
            f"codes (t={codes.t}, n_b={codes.n_b}) were not produced by this model "
            f"(t={model.t}, n_b={model.n_b})"
        )


# -- subcommands ---------------------------------------------------------------

def cmd_build(a) -> int:
    X = _vectors(a.corpus)
    if X.shape[0] == 0:
        raise ParameterError(f"{a.corpus} holds no vectors")
    if a.sample_limit and X.shape[0] > a.sample_limit:
        keep = np.sort(subsample(X.shape[0], a.sample_limit, stream(a.seed, 0, _SAMPLE_PURPOSE)))
        X = X[keep]
    d = X.shape[1]
    t = a.t or d
    t0 = time.perf_counter()
    model = build_model(a.kind, X, t=t, psi=a.psi, m=a.m, seed=a.seed, threads=parallel.get_threads())
    build_s = time.perf_counter() - t0
    save_model(a.out, model)
    bpp = words_per_point(model.t, model.n_b) * 8
    rec = {
        "cmd": "build", "kind": a.kind, "d": d, "t": model.t, "psi": model.psi, "n_b": model.n_b,
        "m": getattr(model, "m", None), "seed": a.seed, "sample_points": int(X.shape[0]),
        "bytes_per_point": bpp, "compression_vs_f32": compression_ratio(model.t, model.n_b, d),
        "build_s": build_s, "threads": parallel.get_threads(), "out": str(a.out),
    }
    _say(f"built {a.kind} model -> {a.out}")
    _table([("t", model.t), ("psi", model.psi), ("n_b", model.n_b), ("bytes/point", bpp),
            ("compression", f"{rec['compression_vs_f32']:g}x"), ("build time (s)", f"{build_s:.3f}")])
    _emit(rec)
    return EXIT_OK


def cmd_encode(a) -> int:
    model = load_model(a.model)
    X = _vectors(a.vectors, model.d)
    t0 = time.perf_counter()
    codes = model.encode(X)
    enc_s = time.perf_counter() - t0
    save_codes(a.out, codes)
    rate = X.shape[0] / enc_s if enc_s > 0 else float("inf")
    _say(f"encoded {X.shape[0]} vectors -> {a.out} ({rate:.0f} vectors/s)")
    _emit({"cmd": "encode", "n": codes.n, "t": codes.t, "n_b": codes.n_b,
           "bytes_per_point": codes.bytes_per_point, "encode_s": enc_s,
           "vectors_per_s": rate, "threads": parallel.get_threads(), "out": str(a.out)})
    return EXIT_OK


def _strategy(a) -> str:
    if a.hnsw:
        if a.nprobe is not None:
            raise ParameterError("--nprobe applies to --ivf, not --hnsw")
        return "hnsw"
    if a.ivf:
        if a.ef_search is not None:
            raise ParameterError("--ef-search applies to --hnsw, not --ivf")
        return "ivf"
    if a.ef_search is not None or a.nprobe is not None:
        raise ParameterError("--ef-search/--nprobe need --hnsw/--ivf")
    return "exhaustive"


def _searcher(a, model, codes: PackedCodes, strategy: str, Q: np.ndarray):
    if strategy == "hnsw":
        index = load_hnsw(a.hnsw, codes)
        ef = a.ef_search or 64
        return lambda qc: hnsw_search(index, qc, a.k, max(ef, min(a.k, codes.n)))
    if strategy == "ivf":
        index = load_ivf(a.ivf, codes)
        if index.d != model.d:
            raise ParameterError(f"IVF index has d={index.d}, model has d={model.d}")
        return lambda qc, qf=Q: ivf_search(index, qf, qc, a.k, a.nprobe or 1)
    return lambda qc: exhaustive_topk(codes, qc, a.k)


def cmd_search(a) -> int:
    strategy = _strategy(a)
    model = load_model(a.model)
    codes = load_codes(a.codes)
    _codes_match(model, codes)
    Q = _vectors(a.queries, model.d)
    search = _searcher(a, model, codes, strategy, Q)
    t0 = time.perf_counter()
    qc = model.encode(Q)
    t1 = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = search(qc.data)
    t2 = time.perf_counter()
    run = run_from_result(result, _ids(a.query_ids, Q.shape[0]), _ids(a.doc_ids, codes.n))
    write_run(a.out, run, tag=f"ike-{strategy}")
    total = t2 - t0
    rec = {"cmd": "search", "strategy": strategy, "queries": int(Q.shape[0]), "k": a.k,
           "mapping_s": t1 - t0, "search_s": t2 - t1, "total_s": total,
           "qps": Q.shape[0] / total if total > 0 else float("inf"),
           "threads": parallel.get_threads(), "out": str(a.out)}
    _say(f"{strategy} search of {Q.shape[0]} queries -> {a.out}")
    _emit(rec)
    return EXIT_OK


def cmd_index_hnsw(a) -> int:
    codes = load_codes(a.codes)
    t0 = time.perf_counter()
    index = hnsw_build(codes, M=a.M, ef_construction=a.ef_construction, seed=a.seed)
    build_s = time.perf_counter() - t0
    save_hnsw(a.out, index)
    _say(f"HNSW over {codes.n} codes -> {a.out} ({build_s:.2f} s)")
    _emit({"cmd": "index-hnsw", "n": codes.n, "M": a.M, "ef_construction": a.ef_construction,
           "max_level": int(index.max_level), "build_s": build_s, "out": str(a.out)})
    return EXIT_OK


def cmd_index_ivf(a) -> int:
    codes = load_codes(a.codes)
    X = _vectors(a.vectors)
    t0 = time.perf_counter()
    index = ivf_build(X, codes, nlist=a.nlist, kmeans_iters=a.kmeans_iters, seed=a.seed)
    build_s = time.perf_counter() - t0
    save_ivf(a.out, index)
    sizes = np.diff(index.offsets)
    _say(f"IVF with {index.nlist} lists over {codes.n} points -> {a.out} ({build_s:.2f} s)")
    _emit({"cmd": "index-ivf", "n": codes.n, "nlist": index.nlist, "largest_list": int(sizes.max()),
           "empty_lists": int((sizes == 0).sum()), "build_s": build_s, "out": str(a.out)})
    return EXIT_OK


def _psi_range(text: str) -> range:
    try:
        lo, _, hi = text.partition("..")
        lo, hi = int(lo), int(hi or lo)
    except ValueError:
        raise ParameterError(f"psi range must look like LO..HI, got {text!r}") from None
    if hi < lo:
        raise ParameterError(f"empty psi range {text!r}")
    return range(lo, hi + 1)


def cmd_tune_psi(a) -> int:
    grid = _psi_range(a.range)
    X = _vectors(a.corpus)
    Q = _vectors(a.queries, X.shape[1])
    qrels = read_qrels(a.qrels)
    qids = _ids(a.query_ids, Q.shape[0])
    dids = _ids(a.doc_ids, X.shape[0])
    t = a.t or X.shape[1]
    best, best_score, table = None, -1.0, []
    for psi in grid:
        model = build_model(a.kind, X, t=t, psi=psi, m=a.m, seed=a.seed, threads=parallel.get_threads())
        codes = model.encode(X)
        result = exhaustive_topk(codes, model.encode(Q).data, a.k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            score = ndcg_at_k(run_from_result(result, qids, dids), qrels, a.k)
        table.append((psi, score))
        _emit({"cmd": "tune-psi", "psi": psi, "n_b": model.n_b, "metric": f"ndcg@{a.k}", "value": score})
        if score > best_score:  # strict: ties keep the smaller psi
            best, best_score = psi, score
    _say(f"{'psi':>4}  ndcg@{a.k}")
    for psi, s in table:
        _say(f"{psi:>4}  {s:.4f}{'  *' if psi == best else ''}")
    _emit({"cmd": "tune-psi", "best_psi": best, "metric": f"ndcg@{a.k}", "value": best_score,
           "candidates": len(table)})
    return EXIT_OK


def cmd_eval(a) -> int:
    run = read_run(a.run)
    qrels = read_qrels(a.qrels)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        mrr = mrr_at_k(run, qrels, a.k, a.min_grade)
        ndcg = ndcg_at_k(run, qrels, a.k)
    for w in caught[:1]:
        _say(f"warning: {w.message}")
    _say(f"MRR@{a.k} {mrr:.4f}  nDCG@{a.k} {ndcg:.4f}")
    _emit({"metric": f"mrr@{a.k}", "value": mrr})
    _emit({"metric": f"ndcg@{a.k}", "value": ndcg})
    return EXIT_OK


def cmd_bench(a) -> int:
    from .bench import paired_scan, time_search

    if a.paired:
        rec = paired_scan(n=a.n, d=a.d, queries=a.queries_n, runs=a.runs, warmup=a.warmup, seed=a.seed)
        _say(f"single-thread scan over {rec['n']} points: bitwise (t={rec['t']}) {rec['bitwise_s']:.4f} s, "
             f"f32 dot product (d={rec['d']}) {rec['float_s']:.4f} s, speedup {rec['speedup']:.2f}x")
        _emit(rec)
        return EXIT_OK
    if not (a.model and a.codes and a.queries):
        raise ParameterError("bench needs --model, --codes and --queries (or --paired)")
    strategy = _strategy(a)
    model = load_model(a.model)
    codes = load_codes(a.codes)
    _codes_match(model, codes)
    Q = _vectors(a.queries, model.d)
    index = None
    if strategy == "hnsw":
        index = load_hnsw(a.hnsw, codes)
    elif strategy == "ivf":
        index = load_ivf(a.ivf, codes)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rec = time_search(model, codes, Q, strategy, index, k=a.k, ef_search=a.ef_search or 64,
                          nprobe=a.nprobe or 1, runs=a.runs, warmup=a.warmup)
    _say(f"{strategy}: mapping {rec['mapping_s']:.4f} s + search {rec['search_s']:.4f} s = "
         f"{rec['total_s']:.4f} s for {rec['queries']} queries ({rec['qps']:.1f} QPS, "
         f"{rec['threads']} threads, {rec['runs']} runs)")
    _emit(rec)
    return EXIT_OK


def cmd_check_properties(a) -> int:
    from . import properties as P
    from .datasets import uniform

    X = uniform(a.n, a.d, seed=a.seed)
    m = a.m
    if a.check == "entropy":
        rec = P.check_entropy(a.kind, X, a.psi, trees=a.trees, m=m, seed=a.seed)
    elif a.check == "bit-independence":
        rec = P.check_bit_independence(a.kind, X, a.psi, trees=a.trees, m=m, seed=a.seed)
    else:
        rng = np.random.default_rng(a.seed)
        pairs = rng.integers(0, a.n, size=(a.pairs * 2, 2))
        pairs = pairs[pairs[:, 0] != pairs[:, 1]][: a.pairs]
        if a.check == "diversity":
            rec = {"check": "diversity", **P.estimate_rho(a.kind, X, pairs, t=a.trees, psi=a.psi,
                                                         m=m, seed=a.seed).as_dict()}
        else:
            rec = P.variance_shrinkage(a.kind, X, pairs, psi=a.psi, m=m, seed=a.seed, models=a.models)
            rec.pop("per_pair_var_small")
            rec.pop("per_pair_var_large")
    _say(" ".join(f"{k}={v}" for k, v in rec.items() if not isinstance(v, (dict, list))))
    _emit(rec)
    return EXIT_OK


def cmd_info(a) -> int:
    _emit({"cmd": "info", "threads": parallel.get_threads(), "max_threads": parallel.max_threads(),
           **machine_info()})
    return EXIT_OK


# -- parser --------------------------------------------------------------------

def _strategy_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--exhaustive", action="store_true", help="full scan (default)")
    g.add_argument("--hnsw", metavar="INDEX", help="search this HNSW index file")
    g.add_argument("--ivf", metavar="INDEX", help="search this IVF index file")
    p.add_argument("--ef-search", type=int, help="HNSW candidate pool (default 64)")
    p.add_argument("--nprobe", type=int, help="IVF lists probed (default 1)")
    p.add_argument("-k", "--k", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ike", description=__doc__.splitlines()[0])
    ap.add_argument("--threads", type=int, help="worker threads (IKE_THREADS overrides; default: all)")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("build", help="build a partitioner model from a corpus")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--kind", choices=sorted(KINDS), default="iforest")
    p.add_argument("--t", type=int, help="partitions (default: corpus dimension)")
    p.add_argument("--psi", type=int, default=2)
    p.add_argument("--m", type=int, help="dimensions per Voronoi partition (default: all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sample-limit", type=int, help="build from a seeded random subset of this many rows")
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("encode", help="map vectors to packed codes")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--vectors", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(fn=cmd_encode)

    p = sub.add_parser("search", help="top-k search, writes a TREC run file")
    p.add_argument("--model", required=True, type=Path)
    p.add_argument("--codes", required=True, type=Path)
    p.add_argument("--queries", required=True, type=Path)
    p.add_argument("--query-ids", type=Path, help="whitespace-separated query ids (default: row numbers)")
    p.add_argument("--doc-ids", type=Path, help="whitespace-separated doc ids (default: row numbers)")
    p.add_argument("--out", required=True, type=Path)
    _strategy_flags(p)
    p.set_defaults(fn=cmd_search)

    p = sub.add_parser("index-hnsw", help="build an HNSW graph over codes")
    p.add_argument("--codes", required=True, type=Path)
    p.add_argument("--M", type=int, default=32)
    p.add_argument("--ef-construction", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(fn=cmd_index_hnsw)

    p = sub.add_parser("index-ivf", help="build an IVF index (k-means on the float corpus)")
    p.add_argument("--codes", required=True, type=Path)
    p.add_argument("--vectors", required=True, type=Path, help="float corpus the codes were made from")
    p.add_argument("--nlist", type=int, help="number of lists (default: about 4*sqrt(n))")
    p.add_argument("--kmeans-iters", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(fn=cmd_index_ivf)

    p = sub.add_parser("tune-psi", help="grid search psi by validation nDCG under exhaustive search")
    p.add_argument("--corpus", required=True, type=Path)
    p.add_argument("--queries", required=True, type=Path)
    p.add_argument("--qrels", required=True, type=Path)
    p.add_argument("--query-ids", type=Path)
    p.add_argument("--doc-ids", type=Path)
    p.add_argument("--range", default="2..16", help="inclusive psi range LO..HI (default 2..16)")
    p.add_argument("--kind", choices=["iforest", "voronoi"], default="iforest")
    p.add_argument("--t", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-k", "--k", type=int, default=10)
    p.set_defaults(fn=cmd_tune_psi)

    p = sub.add_parser("eval", help="MRR@k and nDCG@k of a run file")
    p.add_argument("--run", required=True, type=Path)
    p.add_argument("--qrels", required=True, type=Path)
    p.add_argument("-k", "--k", type=int, default=10)
    p.add_argument("--min-grade", type=int, default=1, help="lowest grade counted as relevant by MRR")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="time query mapping and search, or the paired scan")
    p.add_argument("--paired", action="store_true", help="bitwise vs f32 dot-product scan, single thread")
    p.add_argument("--n", type=int, default=100_000, help="points for --paired")
    p.add_argument("--d", type=int, default=1024, help="dimension (= t) for --paired")
    p.add_argument("--queries-n", type=int, default=20, help="queries for --paired")
    p.add_argument("--model", type=Path)
    p.add_argument("--codes", type=Path)
    p.add_argument("--queries", type=Path)
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--warmup", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    _strategy_flags(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("check-properties", help="statistical checks on uniform synthetic data")
    p.add_argument("check", choices=["entropy", "bit-independence", "diversity", "variance"])
    p.add_argument("--kind", choices=["iforest", "voronoi"], default="iforest")
    p.add_argument("--psi", type=int, default=4)
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int, default=100_000, help="uniform points")
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--trees", type=int, default=500, help="partitions")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--models", type=int, default=50, help="seeds for the variance check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_check_properties)

    p = sub.add_parser("info", help="thread count and machine description")
    p.set_defaults(fn=cmd_info)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        env = os.environ.get("IKE_THREADS")
        parallel.set_threads(int(env) if env else args.threads)
        return args.fn(args)
    except (FormatError, EncodingError) as exc:
        _say(f"ike: format error: {exc}")
        return EXIT_FORMAT
    except (ParameterError, EvaluationError) as exc:
        _say(f"ike: parameter error: {exc}")
        return EXIT_PARAM
    except OSError as exc:
        _say(f"ike: I/O error: {exc}")
        return EXIT_IO
    except IkeError as exc:
        _say(f"ike: {exc}")
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
