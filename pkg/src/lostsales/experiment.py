"""Replicated regret experiments: learner vs. the optimal constant order."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .config import Cell, ExperimentConfig
from .constant_order import default_burn_in, optimal_constant_order
from .learner import ActiveEliminationLearner, kappa2_for
from .rng import VERSION_TAG, SeededRng
from .system import ConstantOrderPolicy, draw_scenario, run_scenario

log = logging.getLogger(__name__)

RESULT_COLUMNS = ["experiment", "seed", "T", "param", "learner_cost", "benchmark_cost", "rel_regret_pct"]
SUMMARY_COLUMNS = [
    "experiment", "param", "T", "n_seeds", "mean_rel_regret_pct", "ci95_low", "ci95_high",
    "ratio_of_means_pct", "mean_abs_regret", "mean_abs_regret_per_T", "q_star", "q_bar", "c_inf",
]


def relative_regret(learner_cost: float, benchmark_cost: float) -> float:
    """100 (C_learner - C_bench) / C_bench; signed."""
    if benchmark_cost == 0:
        raise ZeroDivisionError("benchmark cost is zero")
    if benchmark_cost < 0:
        raise ValueError("benchmark cost must be positive")
    return 100.0 * (learner_cost - benchmark_cost) / benchmark_cost


def absolute_regret(learner_cost: float, T: int, c_inf: float) -> float:
    """C_learner(T) - T * C_inf(q*)."""
    return learner_cost - T * c_inf


@dataclass(frozen=True)
class Benchmark:
    q_star: float
    c_inf: float
    c_inf_se: float
    q_bar: float
    grid_points: int


@dataclass(frozen=True)
class Replication:
    experiment: str
    seed: int
    T: int
    param: float | None
    learner_cost: float
    benchmark_cost: float
    rel_regret_pct: float
    abs_regret: float
    final_a_star: float
    n_epochs: int
    scenario_sha256: str


def compute_benchmark(cell: Cell, cfg: ExperimentConfig) -> Benchmark:
    spec = cfg.benchmark
    T_ref = max(cfg.T)
    grid = np.linspace(0.0, cell.q_bar, spec.grid_points)
    burn_in = spec.burn_in if spec.burn_in is not None else default_burn_in(T_ref, cell.L)
    q_star, est, _ = optimal_constant_order(
        grid, cell.params(T_ref), cell.supply, cell.demand, burn_in, spec.eval_periods, SeededRng(spec.seed)
    )
    if q_star == grid[-1]:
        log.warning("q* sits on q_bar=%.4g for param=%s; the bound may be binding", cell.q_bar, cell.param)
    return Benchmark(q_star, est.estimate, est.se, cell.q_bar, spec.grid_points)


def replicate(cfg: ExperimentConfig, cell: Cell, bench: Benchmark, T: int, seed: int) -> Replication:
    """One learner run and one coupled constant-q* run on the same (D, Z) draws."""
    params = cell.params(T)
    scenario = draw_scenario(T, cell.demand, cell.supply, SeededRng(seed))
    learner = ActiveEliminationLearner(T, cell.h, cell.b, cell.L, cell.q_bar, cell.supply, cfg.K_for(T), cfg.kappa2)
    ours = run_scenario(learner, scenario, params, cell.supply)
    theirs = run_scenario(ConstantOrderPolicy(bench.q_star), scenario, params, cell.supply)
    return Replication(
        experiment=cfg.name,
        seed=seed,
        T=T,
        param=cell.param,
        learner_cost=ours.total_cost,
        benchmark_cost=theirs.total_cost,
        rel_regret_pct=relative_regret(ours.total_cost, theirs.total_cost),
        abs_regret=absolute_regret(ours.total_cost, T, bench.c_inf),
        final_a_star=learner.a_star,
        n_epochs=len(learner.log),
        scenario_sha256=scenario.checksum(),
    )


def _replicate_task(args):
    cfg, cell, bench, T, seed = args
    try:
        return replicate(cfg, cell, bench, T, seed)
    except Exception as exc:
        raise RuntimeError(f"replication failed: param={cell.param} T={T} seed={seed}: {exc}") from exc


def _mean(values) -> float:
    vals = sorted(values)
    return math.fsum(vals) / len(vals)


def summarize(rows: list[Replication], benchmarks: dict) -> list[dict]:
    """Mean and normal-approximation 95% CI per (param, T).

    Values are sorted before summing, so the result does not depend on the
    order in which seeds arrive.
    """
    groups: dict = {}
    for r in rows:
        groups.setdefault((r.param, r.T), []).append(r)
    out = []
    for (param, T) in sorted(groups, key=lambda k: (float("-inf") if k[0] is None else k[0], k[1])):
        grp = groups[(param, T)]
        rel = [r.rel_regret_pct for r in grp]
        m = _mean(rel)
        half = 1.96 * float(np.std(sorted(rel), ddof=1)) / math.sqrt(len(rel)) if len(rel) > 1 else 0.0
        bench = benchmarks[param]
        mean_abs = _mean(r.abs_regret for r in grp)
        out.append({
            "experiment": grp[0].experiment,
            "param": param,
            "T": T,
            "n_seeds": len(grp),
            "mean_rel_regret_pct": m,
            "ci95_low": m - half,
            "ci95_high": m + half,
            "ratio_of_means_pct": relative_regret(_mean(r.learner_cost for r in grp), _mean(r.benchmark_cost for r in grp)),
            "mean_abs_regret": mean_abs,
            "mean_abs_regret_per_T": mean_abs / T,
            "q_star": bench.q_star,
            "q_bar": bench.q_bar,
            "c_inf": bench.c_inf,
        })
    return out


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    benchmarks: dict  # param -> Benchmark
    rows: list[Replication]
    summary: list[dict]

    def cell_rows(self, param=None, T=None) -> list[Replication]:
        return [r for r in self.rows if (param is None or r.param == param) and (T is None or r.T == T)]

    def rel_regret(self, param, T) -> np.ndarray:
        """Per-seed relative regret, ordered by seed."""
        return np.array([r.rel_regret_pct for r in sorted(self.cell_rows(param, T), key=lambda r: r.seed)])

    def metadata(self) -> dict:
        cfg = self.config
        return {
            "experiment": cfg.name,
            "package_version": __version__,
            "rng": VERSION_TAG,
            "config": cfg.raw,
            "seeds": list(cfg.seeds),
            "K": {str(T): cfg.K_for(T) for T in cfg.T},
            "kappa2": {str(T): kappa2_for(T, cfg.kappa2) for T in cfg.T},
            "benchmark_grid": f"{cfg.benchmark.grid_points} evenly spaced points on [0, q_bar]",
            "benchmark_eval_periods": cfg.benchmark.eval_periods,
            "benchmarks": {str(k): asdict(v) for k, v in self.benchmarks.items()},
            "demand_reading": "a configured 'variance' is a variance: sd = sqrt(variance)",
        }

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_results_csv(out / "results.csv", self.rows)
        write_details_csv(out / "details.csv", self.rows)
        write_summary_csv(out / "summary.csv", self.summary)
        (out / "metadata.json").write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        (out / "plot_results.py").write_text(PLOT_SCRIPT)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, out_dir=None) -> ExperimentReport:
    cells = cfg.cells()
    benchmarks = {}
    for cell in cells:
        benchmarks[cell.param] = compute_benchmark(cell, cfg)
        log.info("param=%s q_bar=%.4f q*=%.4f C_inf=%.4f", cell.param, cell.q_bar,
                 benchmarks[cell.param].q_star, benchmarks[cell.param].c_inf)
    tasks = [(cfg, cell, benchmarks[cell.param], T, seed) for cell in cells for T in cfg.T for seed in cfg.seeds]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        rows = [_replicate_task(t) for t in tasks]
    report = ExperimentReport(cfg, benchmarks, rows, summarize(rows, benchmarks))
    if out_dir is not None:
        report.write(out_dir)
    return report


# -- CSV io -------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results_csv(path, rows: list[Replication]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in RESULT_COLUMNS])


def read_results_csv(path) -> list[dict]:
    casts = {"seed": int, "T": int, "param": lambda s: None if s == "" else float(s),
             "learner_cost": float, "benchmark_cost": float, "rel_regret_pct": float}
    with open(path, newline="") as fh:
        return [{k: casts.get(k, str)(v) for k, v in row.items()} for row in csv.DictReader(fh)]


def write_result_dicts(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in RESULT_COLUMNS])


def write_details_csv(path, rows: list[Replication]) -> None:
    cols = [f.name for f in fields(Replication)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(getattr(r, c)) for c in cols])


def write_summary_csv(path, summary: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for s in summary:
            w.writerow([_fmt(s[c]) for c in SUMMARY_COLUMNS])


PLOT_SCRIPT = '''"""Plot relative regret against T, one line per swept parameter value.

Usage: python plot_results.py [summary.csv] [figure.png]
"""
import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

src = sys.argv[1] if len(sys.argv) > 1 else "summary.csv"
dst = sys.argv[2] if len(sys.argv) > 2 else "regret.png"
lines = defaultdict(list)
name = ""
with open(src, newline="") as fh:
    for row in csv.DictReader(fh):
        name = row["experiment"]
        lines[row["param"] or "base"].append(
            (int(row["T"]), float(row["mean_rel_regret_pct"]), float(row["ci95_low"]), float(row["ci95_high"]))
        )
fig, ax = plt.subplots(figsize=(5, 3.5))
for label, pts in sorted(lines.items()):
    pts.sort()
    T = [p[0] for p in pts]
    ax.plot(T, [p[1] for p in pts], marker="o", label=label)
    ax.fill_between(T, [p[2] for p in pts], [p[3] for p in pts], alpha=0.2)
ax.set_xlabel("T")
ax.set_ylabel("relative average regret (%)")
ax.set_title(name)
ax.legend()
fig.tight_layout()
fig.savefig(dst, dpi=150)
'''


# -- comparison against the dynamic program -------------------------------------------

DP_COLUMNS = ["experiment", "param", "delta", "L", "T", "dp_value", "const_q", "const_value", "const_gap_pct"]


def dp_comparison(cfg: ExperimentConfig) -> list[dict]:
    """Optimal lattice constant order vs. the DP optimum, per cell."""
    from .dp import best_constant_order, discretize, solve_dp

    spec = cfg.dp
    if spec is None:
        raise ValueError("config has no 'dp' section")
    out = []
    for cell in cfg.cells():
        order_max = spec.order_max if spec.order_max is not None else cell.q_bar
        inst = discretize(
            cell.demand, cell.supply, spec.delta, L=cell.L, T=spec.T, h=cell.h, b=cell.b,
            order_max=order_max, on_hand_max=spec.on_hand_max, demand_max=spec.demand_max, z_step=spec.z_step,
        )
        sol = solve_dp(inst, spec.budget)
        q, cost, _ = best_constant_order(inst)
        out.append({
            "experiment": cfg.name, "param": cell.param, "delta": spec.delta, "L": cell.L, "T": spec.T,
            "dp_value": sol.value, "const_q": q, "const_value": cost,
            "const_gap_pct": 100.0 * (cost - sol.value) / sol.value,
            "_solution": sol,
        })
    return out


def write_dp_csv(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DP_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in DP_COLUMNS])
