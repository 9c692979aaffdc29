"""Command-line orchestration: gen, train, select, sweep, adapt.

Every command writes its outputs plus a ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 infeasibility or numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import adaptive, datagen, full_linear, pareto, selector, trainers
from .distances import DistanceSpec, build_matrices
from .manifest import build_manifest, hash_files, write_manifest
from .models import CandidatePool, SchemaError, ValidationError, load_pool, save_pool

DEFAULT_GRID = [0.1, 0.05, 0.02, 0.01]


class UsageError(Exception):
    """Semantic argument error; maps to exit code 2 like a parse failure."""


def _positive_int(value: str) -> int:
    n = int(value)
    if n <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return n


def _nonneg_float(value: str) -> float:
    x = float(value)
    if x < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {value}")
    return x


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stableseq",
        description="Select stable model sequences across data-batch retraining iterations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic batch series")
    gen.add_argument("--kind", choices=["linear", "classification"], default="linear")
    gen.add_argument("--n", type=_positive_int, default=200, help="rows per interval")
    gen.add_argument("--p", type=_positive_int, default=10, help="feature count")
    gen.add_argument("--batches", type=int, default=5)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--noise", type=_nonneg_float, default=0.1, help="noise sd (linear)")
    gen.add_argument("--drift", type=_nonneg_float, default=0.0, help="coefficient drift sd (linear)")
    gen.add_argument("--class-sep", type=_nonneg_float, default=2.0, help="class separation (classification)")
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    train = sub.add_parser("train", help="train bootstrap candidate pools per batch")
    train.add_argument("--data", required=True, help="directory written by gen")
    train.add_argument("--family", choices=list(trainers.FAMILIES), default="ridge")
    train.add_argument("--candidates", type=int, default=25)
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--l2", type=_nonneg_float, default=1e-2)
    train.add_argument("--l2-jitter", type=float, nargs=2, default=(0.1, 10.0),
                       metavar=("LO", "HI"), help="log-uniform multiplier range")
    train.add_argument("--max-depth", type=_positive_int, default=3)
    train.add_argument("--min-leaf", type=_positive_int, default=5)
    train.add_argument("--subsample", type=float, default=1.0, help="feature subsample fraction (cart)")
    train.add_argument("--out", required=True)
    train.set_defaults(func=cmd_train)

    select = sub.add_parser("select", help="solve one stable sequence")
    _add_metric_args(select)
    select.add_argument("--alpha", type=_nonneg_float, default=0.01)
    select.add_argument("--anchor", default=None, help="pin batch 1 to this model id")
    select.add_argument("--force-anchor", action="store_true",
                        help="keep the anchor even if it fails the filter")
    select.add_argument("--greedy", action="store_true", help="baseline: per-batch best models")
    select.add_argument("--verify", action="store_true",
                        help="append an exhaustive weak-Pareto check (small pools only)")
    select.add_argument("--dump-distances", action="store_true")
    select.add_argument("--out", required=True)
    select.set_defaults(func=cmd_select)

    swp = sub.add_parser("sweep", help="trace the frontier over a tolerance grid")
    _add_metric_args(swp)
    swp.add_argument("--grid", type=_nonneg_float, nargs="+", default=DEFAULT_GRID)
    swp.add_argument("--data", default=None, help="series directory for out-of-sample losses")
    swp.add_argument("--full-linear", action="store_true",
                     help="overlay the unrestricted linear solver (needs --data, ridge pools)")
    swp.add_argument("--out", required=True)
    swp.set_defaults(func=cmd_sweep)

    adapt = sub.add_parser("adapt", help="grow sequences batch by batch; compare deployments")
    _add_metric_args(adapt)
    adapt.add_argument("--alpha", type=_nonneg_float, default=0.01)
    adapt.add_argument("--start-length", type=_positive_int, default=1)
    adapt.add_argument("--anchor", default=None,
                       help="shared initial model id ('auto' = first solve's choice)")
    adapt.add_argument("--force-anchor", action="store_true",
                       help="keep the anchor even if it fails the filter")
    adapt.add_argument("--check-lemma", action="store_true",
                       help="verify the inter-sequence bound (needs --no-squared)")
    adapt.add_argument("--out", required=True)
    adapt.set_defaults(func=cmd_adapt)

    return parser


def _add_metric_args(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--pools", required=True, help="directory written by train")
    sub.add_argument("--metric", choices=["auto", "linear", "tree", "importance"], default="auto")
    squared = sub.add_mutually_exclusive_group()
    squared.add_argument("--squared", dest="squared", action="store_true", default=True)
    squared.add_argument("--no-squared", dest="squared", action="store_false")
    sub.add_argument("--label-weight", type=_nonneg_float, default=1.0)
    sub.add_argument("--include-intercept", action="store_true")
    sub.add_argument("--loss-source", choices=["val", "train"], default="val")
    sub.add_argument("--threads", type=_positive_int, default=None,
                     help="worker lanes for distance matrices (default: STABLESEQ_THREADS or 1)")


# ---------------------------------------------------------------------------
# command bodies
# ---------------------------------------------------------------------------

def cmd_gen(args, argv: list[str]) -> int:
    if args.batches < 2:
        raise UsageError("--batches must be at least 2")
    out = Path(args.out)
    if args.kind == "linear":
        series, betas = datagen.gen_linear(
            args.n, args.p, args.noise, args.batches, args.seed, args.drift
        )
        extra = {"true_coefficients": betas.tolist()}
    else:
        series, beta = datagen.gen_classification(
            args.n, args.p, args.batches, args.seed, args.class_sep
        )
        extra = {"true_coefficients": beta.tolist()}
    written = series.save(out)
    params = {
        "kind": args.kind, "n": args.n, "p": args.p, "batches": args.batches,
        "noise": args.noise, "drift": args.drift, "class_sep": args.class_sep,
    }
    params.update(extra)
    manifest = build_manifest("gen", argv, params, args.seed, {}, hash_files(written, out))
    write_manifest(manifest, out)
    print(f"wrote {args.batches}-interval series to {out}")
    return 0


def _load_series(path: str) -> datagen.BatchSeries:
    series_dir = Path(path)
    if not (series_dir / "series.json").exists():
        raise UsageError(f"{path} does not contain a series.json")
    return datagen.BatchSeries.load(series_dir)


def cmd_train(args, argv: list[str]) -> int:
    if args.candidates < 1:
        raise UsageError("--candidates must be at least 1")
    series = _load_series(args.data)
    family = trainers.FamilyConfig(
        kind=args.family,
        l2=args.l2,
        l2_jitter=tuple(args.l2_jitter),
        max_depth=args.max_depth,
        min_leaf=args.min_leaf,
        feature_subsample=args.subsample,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pool_seeds = np.random.SeedSequence(args.seed).generate_state(series.n_batches)
    written = []
    jitter_draws = {}
    for b in range(1, series.n_batches + 1):
        pool = trainers.bootstrap_pool(
            series.train_set(b),
            series.validation_set(b),
            args.candidates,
            family,
            seed=int(pool_seeds[b - 1]),
            batch=b,
            feature_bounds=series.feature_bounds,
        )
        path = out / f"pool_{b:03d}.json"
        save_pool(pool, path)
        written.append(path)
        jitter_draws.update({m.id: m.metadata for m in pool.models})
    inputs = hash_files(
        [p for p in Path(args.data).iterdir() if p.suffix in (".csv", ".json")], args.data
    )
    params = {
        "family": args.family, "candidates": args.candidates,
        "l2": args.l2, "l2_jitter": list(args.l2_jitter),
        "max_depth": args.max_depth, "min_leaf": args.min_leaf,
        "subsample": args.subsample, "jitter_draws": jitter_draws,
    }
    manifest = build_manifest("train", argv, params, args.seed, inputs, hash_files(written, out))
    write_manifest(manifest, out)
    print(f"wrote {series.n_batches} pools of {args.candidates} candidates to {out}")
    return 0


def _load_pools(path: str) -> list[CandidatePool]:
    pool_dir = Path(path)
    files = sorted(pool_dir.glob("pool_*.json"))
    if not files:
        raise UsageError(f"no pool_*.json files in {path}")
    pools = [load_pool(f) for f in files]
    pools.sort(key=lambda pool: pool.batch)
    for i, pool in enumerate(pools, start=1):
        if pool.batch != i:
            raise ValidationError(f"pool batches are not consecutive from 1 (saw {pool.batch} at position {i})")
    return pools


def _spec_from_args(args, pools: list[CandidatePool]) -> DistanceSpec:
    metric = args.metric
    if metric == "auto":
        metric = pools[0].models[0].kind
        if metric not in ("linear", "tree", "importance"):  # pragma: no cover
            raise UsageError(f"cannot infer metric for kind {metric!r}")
    return DistanceSpec(
        kind=metric,
        squared=args.squared,
        include_intercept=args.include_intercept,
        label_weight=args.label_weight,
    )


def _loss_source(args) -> str:
    return {"val": "validation", "train": "train"}[args.loss_source]


def cmd_select(args, argv: list[str]) -> int:
    pools = _load_pools(args.pools)
    spec = _spec_from_args(args, pools)
    matrices = build_matrices(pools, spec, threads=args.threads)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    loss_source = _loss_source(args)
    if args.greedy:
        plan = selector.greedy_sequence(pools, matrices, loss_source)
    else:
        graph = selector.build_graph(
            pools, matrices, args.alpha,
            anchor=args.anchor, loss_source=loss_source, force_anchor=args.force_anchor,
        )
        plan = selector.solve_sequence(graph)
    report = plan.to_report()
    if args.verify and not args.greedy:
        ok, cert = pareto.check_wpo(plan, pools, matrices, loss_source)
        report["weakly_pareto_optimal"] = ok
        report["wpo_certificate"] = None if cert is None else cert.to_report()
    written = [out / "plan.json"]
    written[0].write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if args.dump_distances:
        for mat in matrices:
            path = out / f"distances_{mat.from_batch:03d}_{mat.to_batch:03d}.csv"
            mat.to_csv(path)
            written.append(path)
    inputs = hash_files(sorted(Path(args.pools).glob("pool_*.json")), args.pools)
    params = {
        "alpha": args.alpha, "metric": spec.kind, "squared": spec.squared,
        "loss_source": loss_source, "greedy": args.greedy, "anchor": args.anchor,
    }
    manifest = build_manifest("select", argv, params, None, inputs, hash_files(written, out))
    write_manifest(manifest, out)
    print(
        f"plan: {' -> '.join(plan.model_ids)} (stability {plan.stability_loss:.6g})"
    )
    return 0


def cmd_sweep(args, argv: list[str]) -> int:
    pools = _load_pools(args.pools)
    spec = _spec_from_args(args, pools)
    matrices = build_matrices(pools, spec, threads=args.threads)
    loss_source = _loss_source(args)
    points = pareto.sweep(pools, matrices, args.grid, loss_source)
    series = _load_series(args.data) if args.data else None
    test = series.test if series is not None else None
    rows = pareto.frontier_rows(points, test, solver="restricted")
    if args.full_linear:
        if series is None:
            raise UsageError("--full-linear requires --data for the batch datasets")
        if spec.kind != "linear":
            raise UsageError("--full-linear only applies to linear pools")
        batches = [series.train_set(b) for b in range(1, series.n_batches + 1)]
        for point in points:
            eps = full_linear.matched_epsilons(pools, point.alpha)
            result = full_linear.solve_full(batches, eps)
            in_loss = float(result.mse.sum())
            out_loss = None
            if test is not None and test.n > 0:
                preds = [
                    test.X @ result.betas[b] + result.intercepts[b]
                    for b in range(series.n_batches)
                ]
                out_loss = float(sum(np.mean((pr - test.y) ** 2) for pr in preds))
            rows.append(
                {
                    "solver": "full", "alpha": point.alpha, "pred_loss_in": in_loss,
                    "pred_loss_out": out_loss, "stability_loss": result.stability_loss,
                    "gap": None if out_loss is None else out_loss - in_loss,
                }
            )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    frontier = out / "frontier.csv"
    pareto.write_frontier_csv(rows, frontier)
    plans = out / "sweep.json"
    plans.write_text(
        json.dumps([p.plan.to_report() for p in points], indent=2) + "\n", encoding="utf-8"
    )
    inputs = hash_files(sorted(Path(args.pools).glob("pool_*.json")), args.pools)
    params = {"grid": list(args.grid), "metric": spec.kind, "squared": spec.squared,
              "loss_source": loss_source, "full_linear": args.full_linear}
    manifest = build_manifest("sweep", argv, params, None, inputs, hash_files([frontier, plans], out))
    write_manifest(manifest, out)
    print(f"swept {len(points)} tolerances -> {frontier}")
    return 0


def cmd_adapt(args, argv: list[str]) -> int:
    pools = _load_pools(args.pools)
    spec = _spec_from_args(args, pools)
    if args.check_lemma and spec.squared:
        raise UsageError("--check-lemma requires --no-squared (the bound needs a metric)")
    matrices = build_matrices(pools, spec, threads=args.threads)
    loss_source = _loss_source(args)
    bounds = pools[0].feature_bounds
    anchor = args.anchor
    if args.check_lemma and anchor is None:
        anchor = "auto"
    if anchor == "auto":
        first = selector.solve_sequence(
            selector.build_graph(pools[:1], [], args.alpha, loss_source=loss_source)
        )
        anchor = first.model_ids[0]
    stable = adaptive.build_family(
        pools, matrices, args.alpha, spec,
        anchor=anchor, start_length=args.start_length,
        loss_source=loss_source, method="stable", bounds=bounds,
        force_anchor=args.force_anchor,
    )
    greedy = adaptive.build_family(
        pools, matrices, args.alpha, spec,
        anchor=None, start_length=args.start_length,
        loss_source=loss_source, method="greedy", bounds=bounds,
    )
    labels = stable.transition_labels
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    table = out / "family.csv"
    lines = ["method," + ",".join(labels)]
    lines.append("greedy," + ",".join(repr(v) for v in greedy.inter_losses))
    lines.append("stable," + ",".join(repr(v) for v in stable.inter_losses))
    table.write_text("\n".join(lines) + "\n", encoding="utf-8")
    report = {
        "anchor": anchor,
        "alpha": args.alpha,
        "transitions": labels,
        "greedy_inter_losses": greedy.inter_losses,
        "stable_inter_losses": stable.inter_losses,
        "plans": [p.to_report() for p in stable.plans],
    }
    if args.check_lemma:
        checks = []
        for a, b in zip(stable.plans, stable.plans[1:]):
            holds, lhs, rhs = adaptive.stability_bound_check(a, b, spec, bounds)
            checks.append({"lengths": [len(a.model_ids), len(b.model_ids)],
                           "holds": holds, "lhs": lhs, "rhs": rhs})
        report["lemma_checks"] = checks
        if not all(c["holds"] for c in checks):
            raise RuntimeError("inter-sequence stability bound violated")
    report_path = out / "family.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    inputs = hash_files(sorted(Path(args.pools).glob("pool_*.json")), args.pools)
    params = {"alpha": args.alpha, "metric": spec.kind, "squared": spec.squared,
              "anchor": anchor, "start_length": args.start_length,
              "check_lemma": args.check_lemma}
    manifest = build_manifest("adapt", argv, params, None, inputs,
                              hash_files([table, report_path], out))
    write_manifest(manifest, out)
    print(f"built {len(stable.plans)}-plan families -> {table}")
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, SchemaError, selector.InfeasibleError,
            full_linear.InfeasibleEpsilonError, KeyError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:  # console script
    sys.exit(main())
