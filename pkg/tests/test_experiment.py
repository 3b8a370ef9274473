from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import pytest

from lostsales.config import load_config, parse_config
from lostsales.constant_order import long_run_average_cost
from lostsales.experiment import (
    RESULT_COLUMNS,
    absolute_regret,
    read_results_csv,
    relative_regret,
    run_experiment,
    summarize,
    write_result_dicts,
    write_results_csv,
)
from lostsales.models import Discrete, SupplyModel
from lostsales.rng import SeededRng
from lostsales.system import ConstantOrderPolicy, CostParams, Scenario, draw_scenario, run, run_scenario

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def _quick(**changes):
    raw = json.loads((CONFIGS / "quick.json").read_text())
    raw.update(changes)
    return parse_config(raw)


def test_relative_regret_examples():
    assert relative_regret(100.0, 100.0) == 0.0
    assert relative_regret(110.0, 100.0) == pytest.approx(10.0)
    assert relative_regret(95.0, 100.0) == pytest.approx(-5.0)
    with pytest.raises(ZeroDivisionError):
        relative_regret(1.0, 0.0)


def test_absolute_regret_examples():
    assert absolute_regret(0.0, 0, 12.3) == 0.0
    assert absolute_regret(130.0, 10, 12.0) == 10.0


def test_absolute_regret_of_starved_chain_is_the_pipeline_fill():
    # d = 10, s = 4: steady-state cost is b (10 - 4) = 12, reached once the first
    # order lands; the L empty periods before that each cost b * 10 instead.
    supply = SupplyModel("capacity", Discrete.point(4.0))
    T, L = 500, 3
    params = CostParams(1.0, 2.0, L, T)
    scen = Scenario(np.full(T, 10.0), np.full(T, 4.0))
    res = run_scenario(ConstantOrderPolicy(6.0), scen, params, supply)
    assert absolute_regret(res.total_cost, T, 12.0) == L * 2.0 * 4.0
    assert absolute_regret(res.total_cost - L * 8.0, T, 12.0) == 0.0


def test_same_policy_regret_is_within_fluctuation_band(capacity_u515, demand_tn10_var4):
    params = CostParams(5.0, 20.0, 2, 100_000)
    bench = long_run_average_cost(10.0, params, capacity_u515, demand_tn10_var4, eval_periods=200_000,
                                  rng=SeededRng(91))
    res = run(ConstantOrderPolicy(10.0), params.T, params, capacity_u515, demand_tn10_var4, SeededRng(92))
    batches = res.costs.reshape(50, -1).mean(axis=1)
    se_run = batches.std(ddof=1) / np.sqrt(50)
    per_period = absolute_regret(res.total_cost, params.T, bench.estimate) / params.T
    assert abs(per_period) <= 3 * np.hypot(se_run, bench.se)


def test_one_seed_report_has_one_row(tmp_path):
    cfg = _quick(seeds=[5], T=[120])
    report = run_experiment(cfg, out_dir=tmp_path)
    assert len(report.rows) == 1 and len(report.summary) == 1
    for name in ("results.csv", "details.csv", "summary.csv", "metadata.json", "plot_results.py"):
        assert (tmp_path / name).exists()
    header = (tmp_path / "results.csv").read_text().splitlines()[0]
    assert header.split(",") == RESULT_COLUMNS
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["benchmark_grid"].startswith("40 evenly spaced")
    assert meta["K"] == {"120": 11}
    compile((tmp_path / "plot_results.py").read_text(), "plot_results.py", "exec")


@pytest.fixture(scope="module")
def sweep_report():
    cfg = _quick(seeds=[1, 2, 3, 4], T=[100, 200], sweep={"param": "b", "values": [10, 20]})
    return run_experiment(cfg)


def test_results_csv_round_trip(tmp_path, sweep_report):
    write_results_csv(tmp_path / "a.csv", sweep_report.rows)
    parsed = read_results_csv(tmp_path / "a.csv")
    write_result_dicts(tmp_path / "b.csv", parsed)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert parsed[0]["learner_cost"] == sweep_report.rows[0].learner_cost


def test_aggregation_ignores_seed_order(sweep_report):
    rows = list(sweep_report.rows)
    random.Random(0).shuffle(rows)
    assert summarize(rows, sweep_report.benchmarks) == sweep_report.summary


def test_learner_and_benchmark_share_streams(sweep_report):
    cfg = sweep_report.config
    cell = cfg.cells()[0]
    for r in sweep_report.rows:
        want = draw_scenario(r.T, cell.demand, cell.supply, SeededRng(r.seed)).checksum()
        assert r.scenario_sha256 == want


def test_sweep_cells_keep_their_parameters(sweep_report):
    assert sorted(sweep_report.benchmarks) == [10.0, 20.0]
    assert {s["param"] for s in sweep_report.summary} == {10.0, 20.0}
    # larger shortage penalty pushes the optimal order up
    assert sweep_report.benchmarks[20.0].q_star >= sweep_report.benchmarks[10.0].q_star


def test_shipped_configs_validate():
    for path in sorted(CONFIGS.glob("*.json")):
        cfg = load_config(path)
        assert cfg.cells()


def test_sweeps_change_the_right_inputs():
    cfg = load_config(CONFIGS / "fig1d.json")
    sds = [c.demand.dist.sd for c in cfg.cells()]
    assert sds == pytest.approx([2.0, 3.0, 4.0])
    cfg = load_config(CONFIGS / "fig1b.json")
    assert [c.supply.support for c in cfg.cells()] == [(8.0, 12.0), (7.0, 13.0), (6.0, 14.0)]
    assert [c.L for c in load_config(CONFIGS / "fig1c.json").cells()] == [5, 10, 15]
