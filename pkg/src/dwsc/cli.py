"""Command line entry point: ``gen``, ``run`` and ``bench`` subcommands."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import data
from .bench import ExperimentPlan, emit_report, run_plan, top_performers
from .decode import export_dag
from .engine import CrossoverKind, GaConfig, evolve

METHOD_NAMES = [k.value.replace("_", "-") for k in CrossoverKind]


def _cmd_gen(args) -> int:
    spec = data.GenSpec(
        n_services=args.services,
        n_concepts=args.concepts,
        n_locations=args.locations,
        n_clusters=args.clusters,
        data_items_per_service=(args.min_data, args.max_data),
        chain_length=args.chain,
        seed=args.seed,
    )
    matrix = data.load_distance_matrix(args.distance_matrix) if args.distance_matrix else None
    ds = data.generate(spec, matrix)
    data.save(ds.repo, ds.task, args.out)
    print(f"wrote {args.out} ({len(ds.repo.services)} services, {len(ds.repo.locations)} locations)")
    return 0


def _cmd_run(args) -> int:
    ds = data.load(args.dataset)
    overrides = {}
    if args.generations is not None:
        overrides["generations"] = args.generations
    if args.pop is not None:
        overrides["population_size"] = args.pop
    for name in ("p_crossover", "p_mutation", "p_local_search"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    config = GaConfig(crossover_kind=args.method, seed=args.seed, **overrides)
    result = evolve(ds.repo, ds.task, config)
    best = result.final_best
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    dag_path = out_dir / f"{Path(args.dataset).stem}.{config.crossover_kind.value}.{args.seed}.dag.txt"
    if best.dag is not None:
        dag_path.write_text(export_dag(best.dag), encoding="utf-8")
    print(f"fitness {best.fitness!r}")
    if best.qos is not None:
        print(f"total_time {best.qos.total_time!r} total_cost {best.qos.total_cost!r}")
    print(f"services {' '.join(best.chromosome)}")
    print(f"dag {dag_path}")
    return 0


def _cmd_bench(args) -> int:
    plan = ExperimentPlan.from_file(args.plan)
    if args.workers is not None:
        plan = ExperimentPlan(plan.datasets, plan.methods, plan.runs_per_cell, plan.base_seed,
                              plan.ga_overrides, args.workers, plan.report_decimals)
    cells, verdicts = run_plan(plan)
    decimals = args.decimals if args.decimals is not None else plan.report_decimals
    paths = emit_report(cells, verdicts, args.out, decimals=decimals)
    for d, methods in top_performers(cells, verdicts).items():
        print(f"{d}: top performers {', '.join(sorted(m.value for m in methods))}")
    for p in paths:
        print(f"wrote {p}")
    incomplete = [c for c in cells if not c.complete]
    if incomplete:
        for c in incomplete:
            print(f"incomplete cell {c.dataset}/{c.method.value}: {c.failures[0]}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dwsc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--services", type=int, default=200)
    g.add_argument("--concepts", type=int, default=150)
    g.add_argument("--locations", type=int, default=60)
    g.add_argument("--clusters", type=int, default=10)
    g.add_argument("--chain", type=int, default=10)
    g.add_argument("--min-data", type=int, default=1)
    g.add_argument("--max-data", type=int, default=1)
    g.add_argument("--distance-matrix", help="square distance matrix file replacing coordinates")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen)

    r = sub.add_parser("run", help="single GA run on a dataset")
    r.add_argument("--dataset", required=True)
    r.add_argument("--method", choices=METHOD_NAMES, default="dg-lcs")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--generations", type=int)
    r.add_argument("--pop", type=int)
    r.add_argument("--p-crossover", dest="p_crossover", type=float)
    r.add_argument("--p-mutation", dest="p_mutation", type=float)
    r.add_argument("--p-local-search", dest="p_local_search", type=float)
    r.add_argument("--out", default=".", help="directory for the DAG export")
    r.set_defaults(func=_cmd_run)

    b = sub.add_parser("bench", help="run an experiment plan")
    b.add_argument("--plan", required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--workers", type=int)
    b.add_argument("--decimals", type=int)
    b.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"dwsc {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
