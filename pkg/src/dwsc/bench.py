"""Multi-run experiments: seeding, paired Wilcoxon tests, ranking and reports."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import canonical_dumps, load
from .engine import CrossoverKind, GaConfig, evolve

log = logging.getLogger(__name__)

ALPHA = 0.05
EXACT_MAX_N = 25


class PlanError(ValueError):
    pass


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n: int
    exact: bool
    # rank sums of positive and negative differences
    w_plus: float = 0.0
    w_minus: float = 0.0


def _mean_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def _exact_lower_tail(doubled_ranks: Sequence[int], w: int) -> float:
    """P(W+ <= w) under the null, ranks given as doubled integers."""
    total = sum(doubled_ranks)
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in doubled_ranks:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    hits = sum(counts[: w + 1])
    return float(hits) / float(2 ** len(doubled_ranks))


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> WilcoxonResult:
    """Two-sided paired signed-rank test.

    Zero differences are dropped; tied magnitudes get mean ranks. The p-value
    is exact (full null distribution of the positive rank sum) for up to 25
    non-zero differences, otherwise a normal approximation with continuity
    and tie correction. The statistic is the smaller of the two rank sums.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D sequences of equal length")
    if len(x) < 2:
        raise ValueError("need at least two pairs")
    d = x - y
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, True)
    ranks = _mean_ranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)
    if n <= EXACT_MAX_N:
        doubled = [int(round(2 * r)) for r in ranks]
        p = min(1.0, 2.0 * _exact_lower_tail(doubled, int(round(2 * stat))))
        return WilcoxonResult(stat, p, n, True, w_plus, w_minus)
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(((tie_counts ** 3) - tie_counts).sum()) / 48.0
    if var <= 0:
        return WilcoxonResult(stat, 1.0, n, False, w_plus, w_minus)
    z = (abs(stat - mean) - 0.5) / math.sqrt(var)
    z = max(z, 0.0)
    p = min(1.0, math.erfc(z / math.sqrt(2.0)))
    return WilcoxonResult(stat, p, n, False, w_plus, w_minus)


@dataclass(frozen=True)
class ExperimentPlan:
    datasets: tuple[str, ...]
    methods: tuple[CrossoverKind, ...]
    runs_per_cell: int = 30
    base_seed: int = 0
    ga_overrides: dict = field(default_factory=dict)
    workers: int = 1
    report_decimals: int = 2

    def __post_init__(self):
        object.__setattr__(self, "datasets", tuple(str(d) for d in self.datasets))
        object.__setattr__(self, "methods", tuple(CrossoverKind.parse(m) for m in self.methods))
        if not self.methods:
            raise PlanError("plan needs at least one method")
        if not self.datasets:
            raise PlanError("plan needs at least one dataset")
        if self.runs_per_cell < 2:
            raise PlanError("runs_per_cell must be >= 2")
        known = {f.name for f in fields(GaConfig)} - {"crossover_kind", "seed"}
        unknown = set(self.ga_overrides) - known
        if unknown:
            raise PlanError(f"unknown GA overrides: {sorted(unknown)}")

    @classmethod
    def from_file(cls, path) -> "ExperimentPlan":
        path = Path(path)
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise PlanError(f"{path}: {exc}") from exc
        if doc.get("schema_version") != 1:
            raise PlanError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
        base = path.parent
        datasets = [str(p if Path(p).is_absolute() else base / p) for p in doc.get("datasets", [])]
        try:
            return cls(
                datasets=tuple(datasets),
                methods=tuple(doc.get("methods", [])),
                runs_per_cell=int(doc.get("runs_per_cell", 30)),
                base_seed=int(doc.get("base_seed", 0)),
                ga_overrides=dict(doc.get("ga_overrides", {})),
                workers=int(doc.get("workers", 1)),
                report_decimals=int(doc.get("report_decimals", 2)),
            )
        except ValueError as exc:
            raise PlanError(f"{path}: {exc}") from exc

    def to_document(self) -> dict:
        return {
            "schema_version": 1,
            "datasets": list(self.datasets),
            "methods": [m.value for m in self.methods],
            "runs_per_cell": self.runs_per_cell,
            "base_seed": self.base_seed,
            "ga_overrides": dict(sorted(self.ga_overrides.items())),
            "workers": self.workers,
            "report_decimals": self.report_decimals,
        }

    def save(self, path) -> None:
        Path(path).write_text(canonical_dumps(self.to_document()), encoding="utf-8")


@dataclass(frozen=True)
class CellResult:
    dataset: str
    method: CrossoverKind
    fitness_samples: tuple[float, ...]
    mean_convergence: tuple[float, ...]
    seeds: tuple[int, ...] = ()
    failures: tuple[str, ...] = ()

    @property
    def mean(self) -> float:
        return float(np.mean(self.fitness_samples)) if self.fitness_samples else float("nan")

    @property
    def std(self) -> float:
        if len(self.fitness_samples) < 2:
            return float("nan")
        return float(np.std(self.fitness_samples, ddof=1))

    @property
    def complete(self) -> bool:
        return not self.failures


@dataclass(frozen=True)
class PairwiseVerdict:
    dataset: str
    method_a: CrossoverKind
    method_b: CrossoverKind
    statistic: float
    p_value: float
    exact: bool
    winner: CrossoverKind | None

    @property
    def significant(self) -> bool:
        return self.p_value < ALPHA


def cell_seed(base_seed: int, dataset: str, method: CrossoverKind | str, run_index: int) -> int:
    """Stable 63-bit seed for one run; identical inputs give identical seeds."""
    name = CrossoverKind.parse(method).value
    digest = hashlib.blake2b(f"{dataset}|{name}|{run_index}".encode(), digest_size=8).digest()
    return (int.from_bytes(digest, "big") ^ base_seed) & (2 ** 63 - 1)


def dataset_id(path) -> str:
    return Path(path).stem


def _run_one(args):
    path, config = args
    ds = load(path)
    result = evolve(ds.repo, ds.task, config)
    return result.final_best.fitness, result.best_per_generation


def compare(dataset: str, a: CellResult, b: CellResult) -> PairwiseVerdict:
    res = wilcoxon_signed_rank(a.fitness_samples, b.fitness_samples)
    winner = None
    if res.p_value < ALPHA:
        # lower fitness is better: a wins when its differences are mostly negative
        winner = a.method if res.w_minus > res.w_plus else b.method
    return PairwiseVerdict(dataset, a.method, b.method, res.statistic, res.p_value, res.exact, winner)


def run_plan(plan: ExperimentPlan) -> tuple[list[CellResult], list[PairwiseVerdict]]:
    jobs = []
    for path in plan.datasets:
        for method in plan.methods:
            for run in range(plan.runs_per_cell):
                seed = cell_seed(plan.base_seed, dataset_id(path), method, run)
                config = GaConfig(**plan.ga_overrides, crossover_kind=method, seed=seed)
                jobs.append((path, method, run, config))

    outcomes: list = [None] * len(jobs)
    if plan.workers > 1:
        with ProcessPoolExecutor(max_workers=plan.workers) as pool:
            futures = [pool.submit(_run_one, (path, cfg)) for path, _, _, cfg in jobs]
            for k, fut in enumerate(futures):
                try:
                    outcomes[k] = fut.result()
                except Exception as exc:  # recorded per cell, plan continues
                    outcomes[k] = exc
    else:
        loaded = {}
        for k, (path, method, run, cfg) in enumerate(jobs):
            try:
                if path not in loaded:
                    loaded[path] = load(path)
                ds = loaded[path]
                result = evolve(ds.repo, ds.task, cfg)
                outcomes[k] = (result.final_best.fitness, result.best_per_generation)
            except Exception as exc:  # recorded per cell, plan continues
                outcomes[k] = exc
            log.info("%s %s run %d done", dataset_id(path), method.value, run)

    cells: list[CellResult] = []
    verdicts: list[PairwiseVerdict] = []
    k = 0
    for path in plan.datasets:
        did = dataset_id(path)
        row = []
        for method in plan.methods:
            samples, curves, seeds, failures = [], [], [], []
            for run in range(plan.runs_per_cell):
                _, _, _, cfg = jobs[k]
                out = outcomes[k]
                k += 1
                if isinstance(out, Exception):
                    failures.append(f"run {run}: {type(out).__name__}: {out}")
                    continue
                samples.append(out[0])
                curves.append(out[1])
                seeds.append(cfg.seed)
            conv = tuple(float(v) for v in np.mean(curves, axis=0)) if curves and len(curves[0]) else ()
            row.append(CellResult(did, method, tuple(samples), conv, tuple(seeds), tuple(failures)))
        cells.extend(row)
        for i in range(len(row)):
            for j in range(i + 1, len(row)):
                a, b = row[i], row[j]
                if a.complete and b.complete and len(a.fitness_samples) >= 2:
                    verdicts.append(compare(did, a, b))
    return cells, verdicts


def top_performers(cells: Sequence[CellResult], verdicts: Sequence[PairwiseVerdict]) -> dict[str, set]:
    """Per dataset, the methods no other method beats significantly."""
    out: dict[str, set] = {}
    for c in cells:
        out.setdefault(c.dataset, set()).add(c.method)
    for v in verdicts:
        if v.significant and v.winner is not None:
            loser = v.method_b if v.winner == v.method_a else v.method_a
            out[v.dataset].discard(loser)
    return out


def _fmt(x: float, decimals: int) -> str:
    return "nan" if math.isnan(x) else f"{x:.{decimals}f}"


def _table(cells, verdicts, decimals):
    tops = top_performers(cells, verdicts)
    datasets = list(dict.fromkeys(c.dataset for c in cells))
    methods = list(dict.fromkeys(c.method for c in cells))
    lookup = {(c.dataset, c.method): c for c in cells}
    rows = []
    for d in datasets:
        for m in methods:
            c = lookup.get((d, m))
            if c is None:
                continue
            rows.append((d, m, _fmt(c.mean, decimals), _fmt(c.std, decimals),
                         len(c.fitness_samples), m in tops[d], c.complete))
    return datasets, methods, rows


def emit_report(cells: Sequence[CellResult], verdicts: Sequence[PairwiseVerdict], out_dir,
                formats: Sequence[str] = ("csv", "markdown"), decimals: int = 2) -> list[Path]:
    """Write the results table(s) and the per-generation convergence file."""
    if not cells:
        raise ValueError("no results to report")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    datasets, methods, rows = _table(cells, verdicts, decimals)
    written = []

    if "csv" in formats:
        path = out_dir / "results.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["dataset", "method", "mean", "std", "runs", "top_performer", "complete"])
            for d, m, mean, std, n, top, complete in rows:
                w.writerow([d, m.value, mean, std, n, int(top), int(complete)])
        written.append(path)

    if "markdown" in formats:
        path = out_dir / "results.md"
        cell_text = {(d, m): (mean, std, top) for d, m, mean, std, _, top, _ in rows}
        lines = ["| dataset | " + " | ".join(m.value for m in methods) + " |",
                 "|---|" + "---|" * len(methods)]
        for d in datasets:
            parts = []
            for m in methods:
                if (d, m) not in cell_text:
                    parts.append("-")
                    continue
                mean, std, top = cell_text[(d, m)]
                text = f"{mean} ± {std}"
                parts.append(f"**{text}**" if top else text)
            lines.append(f"| {d} | " + " | ".join(parts) + " |")
        lines.append("")
        lines.append("Mean ± sample standard deviation of best fitness (lower is better). "
                     "Bold: no other method is significantly better (two-sided Wilcoxon "
                     f"signed-rank, alpha = {ALPHA}, zero differences dropped; exact for "
                     f"n <= {EXACT_MAX_N}, normal approximation otherwise).")
        if verdicts:
            lines += ["", "| dataset | a | b | W | p | test | winner |", "|---|---|---|---|---|---|---|"]
            for v in verdicts:
                lines.append(f"| {v.dataset} | {v.method_a.value} | {v.method_b.value} | "
                             f"{v.statistic:g} | {v.p_value:.4g} | {'exact' if v.exact else 'normal'} | "
                             f"{v.winner.value if v.winner else '-'} |")
        incomplete = [f"{c.dataset}/{c.method.value}" for c in cells if not c.complete]
        if incomplete:
            lines += ["", "Incomplete cells: " + ", ".join(incomplete)]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        written.append(path)

    path = out_dir / "convergence.csv"
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["dataset", "method", "generation", "mean_best_fitness"])
        for c in cells:
            for g, v in enumerate(c.mean_convergence):
                w.writerow([c.dataset, c.method.value, g, repr(v)])
    written.append(path)
    return written
