"""
A small benchmark
=================

Runs every crossover on one generated dataset with paired seeds, compares
them with Wilcoxon signed-rank tests and writes the report files. The full
experiment uses 30 runs per cell; this one is shrunk to finish in about a
minute.
"""

import tempfile
from pathlib import Path

from dwsc.bench import ExperimentPlan, emit_report, run_plan, top_performers
from dwsc.data import GenSpec, generate, save

out = Path(tempfile.mkdtemp(prefix="dwsc-demo-"))
ds = generate(GenSpec(n_services=150, n_clusters=8, seed=9))
save(ds.repo, ds.task, out / "demo.json")

plan = ExperimentPlan(
    datasets=(str(out / "demo.json"),),
    methods=("index", "dg_index", "dg_two_point", "dg_lcs"),
    runs_per_cell=8,
    base_seed=1,
    ga_overrides={"population_size": 30, "generations": 30},
    report_decimals=5,
)
cells, verdicts = run_plan(plan)
for c in cells:
    print(f"{c.method.value:13s} mean {c.mean:.5f}  std {c.std:.5f}")
print("top performers:", {d: sorted(m.value for m in t) for d, t in top_performers(cells, verdicts).items()})

# results.csv, results.md and convergence.csv land next to the dataset
for path in emit_report(cells, verdicts, out, decimals=plan.report_decimals):
    print("wrote", path)
print((out / "results.md").read_text())
