from __future__ import annotations

import json
from pathlib import Path


from lostsales.cli import SUBCOMMANDS, build_parser, main

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden" / "help.txt"


def help_text() -> str:
    parser = build_parser()
    parts = [parser.format_help()]
    sub = next(a for a in parser._actions if a.dest == "command")
    for name in SUBCOMMANDS:
        parts.append(sub.choices[name].format_help())
    return "\n".join(parts)


def test_help_matches_golden_file():
    assert help_text() == GOLDEN.read_text()


def test_help_lists_every_flag():
    text = help_text()
    for flag in ("--config", "--seed", "--out", "--jobs", "--verbose", "--oracle"):
        assert flag in text


def test_validate_config_exits_zero(capsys):
    assert main(["validate-config", "--config", str(CONFIGS / "fig1a.json")]) == 0
    assert capsys.readouterr().out.startswith("ok: fig1a")


def test_learn_is_byte_reproducible(tmp_path):
    for run in ("a", "b"):
        assert main(["learn", "--config", str(CONFIGS / "quick.json"), "--seed", "7", "--jobs", "1",
                     "--out", str(tmp_path / run)]) == 0
    for name in ("results.csv", "epoch_log.csv", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_and_serial_experiments_agree(tmp_path):
    cfg = str(CONFIGS / "quick.json")
    assert main(["experiment", "--config", cfg, "--jobs", "1", "--out", str(tmp_path / "s")]) == 0
    assert main(["experiment", "--config", cfg, "--jobs", "2", "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "s" / "results.csv").read_bytes() == (tmp_path / "p" / "results.csv").read_bytes()


def test_outputs_stay_in_the_output_directory(tmp_path, monkeypatch):
    work = tmp_path / "cwd"
    work.mkdir()
    monkeypatch.chdir(work)
    out = tmp_path / "out"
    for cmd in (["simulate", "--oracle"], ["benchmark"], ["learn"]):
        assert main([*cmd, "--config", str(CONFIGS / "quick.json"), "--jobs", "1", "--out", str(out)]) == 0
    assert list(work.iterdir()) == []
    assert {"trace.csv", "benchmark.csv", "results.csv", "epoch_log.csv"} <= {p.name for p in out.iterdir()}


def test_dp_subcommand(tmp_path):
    raw = json.loads((CONFIGS / "fig3_dp.json").read_text())
    raw["dp"].update(T=20, order_max=12)
    cfg = tmp_path / "dp.json"
    cfg.write_text(json.dumps(raw))
    assert main(["dp", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "dp.csv").exists() and (tmp_path / "o" / "dp_policy.csv").exists()


def _single_line_error(capsys):
    err = capsys.readouterr().err
    assert err.startswith("error:") and err.count("\n") == 1
    return err


def test_unknown_flag_exits_one(capsys):
    assert main(["learn", "--config", str(CONFIGS / "quick.json"), "--bogus"]) == 1
    assert "--bogus" in _single_line_error(capsys)


def test_missing_subcommand_exits_one(capsys):
    assert main([]) == 1
    _single_line_error(capsys)


def test_malformed_json_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"name": "x",\n "h": 5,,}')
    assert main(["validate-config", "--config", str(bad)]) == 1
    assert "line 2" in _single_line_error(capsys)


def test_schema_violation_exits_one(tmp_path, capsys):
    raw = json.loads((CONFIGS / "quick.json").read_text())
    raw["L"] = 0
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(raw))
    assert main(["validate-config", "--config", str(cfg)]) == 1
    assert "L" in _single_line_error(capsys)


def test_infeasible_q_bar_exits_one(tmp_path, capsys):
    raw = json.loads((CONFIGS / "fig2a.json").read_text())
    raw["q_bar"] = 12  # yield with E[Z] = 1: E[s] = 12 > E[D] = 10
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(raw))
    assert main(["validate-config", "--config", str(cfg)]) == 1
    assert "q_bar" in _single_line_error(capsys)


def test_runtime_fault_exits_two(tmp_path, capsys):
    raw = json.loads((CONFIGS / "fig3_dp.json").read_text())
    raw["dp"]["budget"] = 10
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(raw))
    assert main(["dp", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "BudgetExceeded" in _single_line_error(capsys)
