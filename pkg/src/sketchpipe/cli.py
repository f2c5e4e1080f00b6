"""Command-line surface: sketching, PCA, K-means, bound evaluation, and
experiment reproduction with CSV output.

All randomness flows from --seed; identical invocations write identical
files.  The SKETCHPIPE_THREADS environment variable caps how many K-means
replicates run concurrently.
"""

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bounds as bd
from ._hash import derive_seed
from .cluster import (
    clustering_accuracy,
    feature_extraction_baseline,
    feature_selection_exact_svd,
    lloyd_full,
    sparsified_kmeans,
    sparsified_kmeans_two_pass,
)
from .datagen import read_idx
from .errors import ParameterError
from .estimators import (
    estimate_covariance,
    estimate_mean,
    explained_variance,
    top_eigenvectors,
)
from .experiments import EXPERIMENTS, run_experiment, write_csv
from .io import (
    DENSE_MAGIC,
    SKETCH_MAGIC,
    DenseFileSource,
    read_dense,
    read_sketch,
    write_sketch,
)
from .sketch import DataStats, plan_for, sketch_stream
from .transform import PreconditionSpec, unprecondition


def _thread_cap():
    raw = os.environ.get("SKETCHPIPE_THREADS", "")
    if raw.strip():
        return max(1, int(raw))
    return min(4, os.cpu_count() or 1)


def _sniff_magic(path):
    with open(path, "rb") as fh:
        return fh.read(5)


def cmd_sketch(args):
    source = DenseFileSource(args.input, chunk_cols=args.chunk_cols)
    spec = PreconditionSpec.create(
        args.transform, source.p, sign_seed=derive_seed(args.seed, 0xD5)
    )
    plan = plan_for(spec, args.gamma, master_seed=derive_seed(args.seed, 0x5A))
    t0 = time.perf_counter()
    sketch = sketch_stream(source, spec, plan)
    elapsed = time.perf_counter() - t0
    write_sketch(args.output, sketch)
    nnz = sketch.n * sketch.m
    print(f"passes: {source.passes}")
    print(f"columns: {sketch.n}  kept per column: {sketch.m} of {spec.p_pad}")
    print(f"nnz: {nnz}")
    print(f"sketch seconds: {elapsed:.3f}")
    return 0


def cmd_pca(args):
    sketch = read_sketch(args.input)
    spec = sketch.spec
    mean = estimate_mean(sketch)
    est = estimate_covariance(sketch)
    V = top_eigenvectors(est.matrix, args.k)
    U = np.column_stack(
        [unprecondition(V[:, j], spec)[: spec.p] for j in range(args.k)]
    )
    fields = ["coord", "mean"] + [f"pc{j + 1}" for j in range(args.k)]
    rows = []
    for i in range(spec.p):
        row = {"coord": i, "mean": mean[i]}
        row.update({f"pc{j + 1}": U[i, j] for j in range(args.k)})
        rows.append(row)
    write_csv(args.out_csv, fields, rows)
    print(f"wrote {args.out_csv} ({spec.p} coordinates, {args.k} components)")
    if args.reference:
        X = read_dense(args.reference)
        print(f"explained variance vs reference: {explained_variance(U, X):.6f}")
    return 0


def _one_kmeans_replicate(args, data, rep):
    seed = args.seed + 1299709 * rep
    t0 = time.perf_counter()
    if args.baseline == "feature-extraction":
        m = int(round(args.gamma * data.shape[0]))
        res = feature_extraction_baseline(
            data, args.K, m, n_init=args.n_init, seed=seed,
            recompute_centers=args.passes == 2,
        )
    elif args.baseline == "feature-selection-exact-svd":
        m = int(round(args.gamma * data.shape[0]))
        res = feature_selection_exact_svd(
            data, args.K, m, n_init=args.n_init, seed=seed,
            recompute_centers=args.passes == 2,
        )
    elif args.gamma >= 1.0 and args.transform == "none":
        res = lloyd_full(data, args.K, n_init=args.n_init, seed=seed)
    elif args.passes == 2:
        res = sparsified_kmeans_two_pass(
            data, args.K, args.gamma, n_init=args.n_init, seed=seed,
            kind=args.transform,
        )
    else:
        res = sparsified_kmeans(
            data, args.K, args.gamma, n_init=args.n_init, seed=seed,
            kind=args.transform,
        )
    return rep, res, time.perf_counter() - t0


def cmd_kmeans(args):
    magic = _sniff_magic(args.input)
    if magic == SKETCH_MAGIC:
        if args.passes == 2 or args.baseline != "none":
            raise ParameterError(
                "a sketch input supports only the 1-pass sparsified variant"
            )
        sketch = read_sketch(args.input)
        from .cluster import _sparsified_on_sketch

        rows = []
        for rep in range(args.replicates):
            t0 = time.perf_counter()
            res = _sparsified_on_sketch(
                sketch, args.K, n_init=args.n_init, seed=args.seed + 1299709 * rep
            )
            rows.append((rep, res, time.perf_counter() - t0))
    elif magic == DENSE_MAGIC:
        data = read_dense(args.input)
        workers = _thread_cap()
        if workers > 1 and args.replicates > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                rows = list(
                    pool.map(
                        lambda rep: _one_kmeans_replicate(args, data, rep),
                        range(args.replicates),
                    )
                )
        else:
            rows = [
                _one_kmeans_replicate(args, data, rep)
                for rep in range(args.replicates)
            ]
    else:
        raise ParameterError(f"unrecognized input file magic {magic!r}")

    truth = None
    if args.labels_idx:
        truth = read_idx(args.labels_idx)
    rows.sort(key=lambda r: r[0])
    out = []
    for rep, res, seconds in rows:
        out.append(
            {
                "replicate": rep,
                "accuracy": (
                    clustering_accuracy(res.assignments.labels, truth)
                    if truth is not None
                    else ""
                ),
                "objective": res.objective,
                "iterations": res.diagnostics.get("iterations"),
                "seconds": seconds,
            }
        )
    fields = ["replicate", "accuracy", "objective", "iterations", "seconds"]
    if args.out_csv:
        write_csv(args.out_csv, fields, out)
        print(f"wrote {args.out_csv}")
    objs = np.array([r["objective"] for r in out], dtype=float)
    print(f"objective mean: {objs.mean():.6g}  std: {objs.std():.6g}")
    if truth is not None:
        accs = np.array([r["accuracy"] for r in out], dtype=float)
        print(f"accuracy mean: {accs.mean():.4f}  std: {accs.std():.4f}")
    return 0


def cmd_bounds(args):
    stats = None
    if args.which in ("mean", "cov"):
        stats = DataStats(
            max_abs=args.max_abs,
            max_row_norm=args.max_row_norm,
            max_col_norm=args.max_col_norm,
            frob_norm=args.frob_norm,
            max_fourth_moment_row=args.max4row,
            n=args.n,
            p=args.p,
        )
    if args.which == "mean":
        inputs = bd.BoundInputs(p=args.p, m=args.m, n=args.n, stats=stats)
        if args.t is not None:
            print(f"delta1: {bd.mean_delta1(args.t, inputs)!r}")
        if args.delta is not None:
            print(f"t: {bd.mean_t_for_delta1(args.delta, inputs)!r}")
    elif args.which == "cov":
        inputs = bd.BoundInputs(
            p=args.p, m=args.m, n=args.n, stats=stats, rho=args.rho
        )
        L, sigma_sq = bd.cov_constants(inputs, args.c_norm, args.diag_c_norm)
        print(f"L: {L!r}")
        print(f"sigma_sq: {sigma_sq!r}")
        if args.t is not None:
            print(f"delta2: {bd.cov_delta2(args.t, L, sigma_sq, args.p)!r}")
        if args.delta is not None:
            print(f"t: {bd.cov_t_for_delta2(args.delta, L, sigma_sq, args.p)!r}")
    elif args.which == "hk":
        if args.t is not None:
            print(f"delta3: {bd.hk_delta3(args.t, args.n_k, args.p, args.m)!r}")
        if args.delta is not None:
            print(f"t: {bd.hk_t_for_delta3(args.delta, args.n_k, args.p, args.m)!r}")
    elif args.which == "jl":
        print(f"min_m: {bd.jl_min_m(args.beta, args.p)!r}")
    elif args.which == "cor4":
        print(f"min_m: {bd.cor4_min_m(args.p, args.n, args.t, args.eta)!r}")
    if args.which in ("mean", "cov") and args.alpha is not None:
        print(
            f"rho: {bd.ros_rho(args.alpha, args.p, args.n, args.m, args.eta)!r}"
        )
    return 0


def cmd_experiment(args):
    path, summary = run_experiment(
        args.name, args.out_dir, seed=args.seed, scale=args.scale,
        mnist_dir=args.mnist_dir,
    )
    print(f"wrote {path}")
    for key, value in sorted(summary.items(), key=lambda kv: str(kv[0])):
        if key == "per_run":
            continue
        print(f"{key}: {value}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sketchpipe",
        description="Single-pass data sparsification, PCA and K-means on the sketch",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sketch", help="sketch a dense matrix file in one pass")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--transform", choices=("hadamard", "dct", "none"), default="hadamard")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chunk-cols", type=int, default=8192)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("pca", help="mean, covariance and top components from a sketch")
    p.add_argument("input")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--reference", help="dense matrix file for explained variance")
    p.set_defaults(func=cmd_pca)

    p = sub.add_parser("kmeans", help="cluster a dense matrix or sketch file")
    p.add_argument("input")
    p.add_argument("-K", type=int, required=True)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--transform", choices=("hadamard", "dct", "none"), default="hadamard")
    p.add_argument("--passes", type=int, choices=(1, 2), default=1)
    p.add_argument(
        "--baseline",
        choices=("none", "feature-extraction", "feature-selection-exact-svd"),
        default="none",
    )
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--n-init", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labels-idx", help="IDX label file for accuracy")
    p.add_argument("--out-csv")
    p.set_defaults(func=cmd_kmeans)

    p = sub.add_parser("bounds", help="evaluate closed-form bounds")
    p.add_argument("--which", choices=("mean", "cov", "hk", "jl", "cor4"), required=True)
    p.add_argument("-p", type=int, required=True)
    p.add_argument("-m", type=int, default=1)
    p.add_argument("-n", type=int, default=1)
    p.add_argument("--n-k", type=int, default=1)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--t", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--rho", type=float)
    p.add_argument("--max-abs", type=float, default=1.0)
    p.add_argument("--max-row-norm", type=float, default=1.0)
    p.add_argument("--max-col-norm", type=float, default=1.0)
    p.add_argument("--frob-norm", type=float, default=1.0)
    p.add_argument("--max4row", type=float, default=1.0)
    p.add_argument("--c-norm", type=float, default=1.0)
    p.add_argument("--diag-c-norm", type=float, default=1.0)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("experiment", help="reproduce a named experiment")
    p.add_argument("--name", choices=sorted(EXPERIMENTS), required=True)
    p.add_argument("--out-dir", default="results")
    p.add_argument("--seed", type=int, default=2026)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--mnist-dir")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParameterError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
