"""Command line entry point: ``dpprec <subcommand>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _accel
from .catalog import SynthConfig, generate_synthetic, ingest_catalog, ingest_users, write_catalog, write_users
from .embedding import fit_reduction, project
from .errors import DPPRecError
from .evalharness import bench_sampling, oracle_total_variation, run_offline_eval, write_report
from .pipeline import PipelineConfig, recommend
from .rng import request_rng
from .service import ServiceConfig, resolve_reduced

TV_BOUND = 0.02
SCALING_BOUND = 3.0


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_gen_data(args) -> int:
    config = SynthConfig(n_items=args.items, n_users=args.users, n_categories=args.categories)
    catalog, users = generate_synthetic(config, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_catalog(catalog, out / "catalog.jsonl")
    write_users(users, out / "users.jsonl")
    print(f"wrote {catalog.N} items and {len(users)} users to {out}")
    return 0


def cmd_reduce_dims(args) -> int:
    catalog = ingest_catalog(args.input)
    model = fit_reduction(catalog.semantic_matrix, args.d)
    reduced = catalog.with_reduced(project(model, catalog.semantic_matrix))
    write_catalog(reduced, args.out)
    kept = model.explained_variance.sum() / np.trace(np.cov(catalog.semantic_matrix.T, bias=True))
    print(f"reduced {catalog.D} -> {args.d} dims, {kept:.1%} of variance kept; wrote {args.out}")
    return 0


def cmd_recommend(args) -> int:
    catalog = ingest_catalog(args.catalog)
    users = ingest_users(args.users)
    if args.user_id is not None:
        users = [u for u in users if u.id == args.user_id]
        if not users:
            print(f"unknown user {args.user_id}", file=sys.stderr)
            return 2
    reduced = resolve_reduced(catalog, d=args.d)
    config = PipelineConfig(retrieval_size=args.retrieval, dpp_size=args.k, variant=args.variant, seed=args.seed)
    failures = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for user in users:
            try:
                recs = recommend(user, catalog, reduced, config, request_rng(args.seed, user.id, args.variant))
            except DPPRecError as exc:
                failures += 1
                logging.warning("user %s: %s", user.id, exc)
                continue
            fh.write(json.dumps(recs.to_record(), separators=(",", ":")) + "\n")
    print(f"wrote recommendations for {len(users) - failures} users to {args.out} ({failures} failed)")
    return 0


def cmd_oracle(args) -> int:
    tv = oracle_total_variation(args.n, args.d, args.k, args.draws, args.seed)
    verdict = "PASS" if tv < TV_BOUND else "FAIL"
    print(f"total_variation={tv:.6f} bound={TV_BOUND} {verdict}")
    return 0 if verdict == "PASS" else 1


def cmd_evaluate(args) -> int:
    catalog = ingest_catalog(args.catalog)
    users = ingest_users(args.users)
    reduced = resolve_reduced(catalog, d=args.d)
    report = run_offline_eval(catalog, users, reduced, retrieval_size=args.retrieval, dpp_size=args.k,
                              seed=args.seed, workers=args.workers)
    write_report(report, args.out, args.format)
    for row in report.rows:
        print(f"{row.variant}: relevance={row.mean_relevance:.4f} volume_ratio={row.volume_ratio_vs_A:.4g} "
              f"business={row.mean_business_diversity:.4f} degenerate={row.degenerate_count}")
    if any(report.failures.values()):
        print(f"pipeline failures per variant: {report.failures}")
    return 0


def cmd_bench(args) -> int:
    ns = _int_list(args.n)
    backends = ["numba", "numpy"] if args.backend == "both" else [args.backend]
    status = 0
    for name in backends:
        with _accel.backend_scope(name):
            times = bench_sampling(ns, d=args.d, k=args.k, seed=args.seed, repeats=args.repeats)
        for n, t in times.items():
            print(f"backend={name} N={n} d={args.d} k={args.k} seconds={t:.6f}")
        if len(ns) >= 2:
            ratio = times[ns[-1]] / times[ns[0]]
            growth = ns[-1] / ns[0]
            print(f"backend={name} time ratio N={ns[-1]}/N={ns[0]}: {ratio:.3f} (size ratio {growth:g})")
            # linear scaling allows 3x for a doubling of N
            if args.check_scaling and ratio >= SCALING_BOUND * growth / 2:
                status = 1
    return status


def cmd_serve(args) -> int:  # pragma: no cover - blocking server
    from .service import serve

    serve(ServiceConfig.from_file(args.config))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpprec", description="Diversified recommendations with k-DPPs")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a seeded synthetic catalog and user set")
    p.add_argument("--items", type=int, default=5000)
    p.add_argument("--users", type=int, default=500)
    p.add_argument("--categories", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("reduce-dims", help="append PCA-reduced embeddings to a catalog")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce_dims)

    p = sub.add_parser("recommend", help="run the pipeline for every user")
    p.add_argument("--catalog", required=True)
    p.add_argument("--users", required=True)
    p.add_argument("--variant", choices=["A", "B", "C"], default="B")
    p.add_argument("--k", type=int, default=60)
    p.add_argument("--retrieval", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=64, help="PCA size when the catalog has no reduced embeddings")
    p.add_argument("--user-id", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_recommend)

    p = sub.add_parser("oracle", help="total-variation check of the sampler against enumeration")
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--draws", type=int, default=200_000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("evaluate", help="offline A/B/C evaluation report")
    p.add_argument("--catalog", required=True)
    p.add_argument("--users", required=True)
    p.add_argument("--retrieval", type=int, default=300)
    p.add_argument("--k", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["csv", "markdown"], default="csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="wall-clock of sample_k_dpp per catalog size")
    p.add_argument("--n", default="1000,2000")
    p.add_argument("--d", type=int, default=64)
    p.add_argument("--k", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=7)
    p.add_argument("--backend", choices=["numba", "numpy", "both"], default=_accel.backend())
    p.add_argument("--check-scaling", action="store_true",
                   help="exit non-zero when doubling N costs 3x or more")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="start the HTTP service")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except DPPRecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
