"""Command-line entry point.

Exit status: 0 on success, 1 on a usage or config error, 2 on a runtime fault.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, load_config
from .constant_order import default_burn_in, evaluate_grid
from .errors import ConfigError
from .experiment import dp_comparison, run_experiment, write_dp_csv
from .learner import ActiveEliminationLearner
from .rng import SeededRng
from .system import ConstantOrderPolicy, draw_scenario, run_scenario, write_trace_csv

log = logging.getLogger("lostsales")

SUBCOMMANDS = {
    "validate-config": "parse and validate a config, then exit",
    "simulate": "simulate one constant-order policy and write its trace",
    "benchmark": "evaluate the constant-order grid and write benchmark.csv",
    "learn": "run the learner against the coupled benchmark for the base cell",
    "dp": "solve the lattice dynamic program and compare the best constant order",
    "experiment": "run every cell, horizon and seed of an experiment family",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message} (see --help)")


def _formatter(prog):
    return argparse.HelpFormatter(prog, width=88, max_help_position=30)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False, formatter_class=_formatter)
    common.add_argument("--config", required=True, metavar="PATH", help="experiment config (JSON)")
    common.add_argument("--seed", type=int, metavar="N", help="override the seeds: learn/simulate use N alone, "
                        "experiment uses N, N+1, ...")
    common.add_argument("--out", metavar="DIR", help="output directory (default: output_dir from the config)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1, metavar="N",
                        help="worker processes for replications (default: logical cores)")
    common.add_argument("--verbose", "-v", action="count", default=0, help="log progress (repeat for debug)")
    parser = _Parser(prog="lostsales", description="Lost-sales inventory learning experiments.",
                     formatter_class=_formatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True, parser_class=_Parser)
    for name, text in SUBCOMMANDS.items():
        p = sub.add_parser(name, parents=[common], help=text, description=text, formatter_class=_formatter)
        if name == "simulate":
            p.add_argument("--oracle", action="store_true", help="include hidden demand and shock columns")
    return parser


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.out if args.out else cfg.output_dir)


def _single_seed(args, cfg) -> int:
    return args.seed if args.seed is not None else cfg.seeds[0]


def cmd_validate(args, cfg):
    cells = cfg.cells()
    print(f"ok: {cfg.name}: {len(cells)} cell(s), T={list(cfg.T)}, {len(cfg.seeds)} seed(s), "
          f"q_bar={', '.join(f'{c.q_bar:.6g}' for c in cells)}")


def cmd_simulate(args, cfg):
    cell = cfg.cells()[0]
    T = max(cfg.T)
    q = cfg.policy_q if cfg.policy_q is not None else cell.q_bar
    scen = draw_scenario(T, cell.demand, cell.supply, SeededRng(_single_seed(args, cfg)))
    res = run_scenario(ConstantOrderPolicy(q), scen, cell.params(T), cell.supply)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_trace_csv(out / "trace.csv", res.trace, oracle=args.oracle)
    print(f"q={q:.6g} T={T} total_cost={res.total_cost!r}")


def cmd_benchmark(args, cfg):
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    cells = cfg.cells()
    spec = cfg.benchmark
    for cell in cells:
        T = max(cfg.T)
        burn = spec.burn_in if spec.burn_in is not None else default_burn_in(T, cell.L)
        seed = args.seed if args.seed is not None else spec.seed
        table = evaluate_grid(np.linspace(0, cell.q_bar, spec.grid_points), cell.params(T), cell.supply,
                              cell.demand, burn, spec.eval_periods, SeededRng(seed))
        name = "benchmark.csv" if len(cells) == 1 else f"benchmark_param={cell.param:g}.csv"
        table.write_csv(out / name)
        i = table.best_index
        print(f"param={cell.param} q*={table.q[i]:.6g} cost={table.cost_mean[i]:.6g} +- {table.cost_se[i]:.2g}")


def cmd_learn(args, cfg):
    seeds = (_single_seed(args, cfg),) if args.seed is not None else cfg.seeds
    base = replace(cfg, sweep_param=None, sweep_values=(), seeds=seeds)
    out = _out_dir(args, cfg)
    report = run_experiment(base, jobs=args.jobs, out_dir=out)
    cell = base.cells()[0]
    T = max(base.T)
    learner = ActiveEliminationLearner(T, cell.h, cell.b, cell.L, cell.q_bar, cell.supply, base.K_for(T), base.kappa2)
    run_scenario(learner, draw_scenario(T, cell.demand, cell.supply, SeededRng(seeds[0])), cell.params(T), cell.supply)
    learner.write_log_csv(out / "epoch_log.csv")
    for s in report.summary:
        print(f"T={s['T']} mean_rel_regret_pct={s['mean_rel_regret_pct']:.3f} (n={s['n_seeds']})")


def cmd_dp(args, cfg):
    rows = dp_comparison(cfg)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    write_dp_csv(out / "dp.csv", rows)
    for r in rows:
        suffix = "" if len(rows) == 1 else f"_param={r['param']:g}"
        r["_solution"].write_policy_csv(out / f"dp_policy{suffix}.csv")
        print(f"param={r['param']} dp={r['dp_value']:.6g} const(q={r['const_q']:g})={r['const_value']:.6g} "
              f"gap={r['const_gap_pct']:.3f}%")


def cmd_experiment(args, cfg):
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    out = _out_dir(args, cfg)
    report = run_experiment(cfg, jobs=args.jobs, out_dir=out)
    if cfg.dp is not None:
        write_dp_csv(out / "dp.csv", dp_comparison(cfg))
    for s in report.summary:
        print(f"param={s['param']} T={s['T']} mean_rel_regret_pct={s['mean_rel_regret_pct']:.3f} "
              f"[{s['ci95_low']:.3f}, {s['ci95_high']:.3f}]")


HANDLERS = {
    "validate-config": cmd_validate,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
    "learn": cmd_learn,
    "dp": cmd_dp,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        HANDLERS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime faults surface as exit status 2
        log.debug("runtime fault", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
