"""End-to-end tests of the command-line interface."""

import json

import pytest

from sqzfilter.cli import main


def test_simulate_writes_traces_budget_and_figure(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["simulate", "--out", str(out), "--format", "csv"])
    assert code == 0
    assert (out / "traces.csv").exists()
    assert (out / "budget.json").exists()
    assert (out / "traces.png").exists()
    stdout = capsys.readouterr().out
    assert "[paper-default]" in stdout
    assert "wrote" in stdout


def test_simulate_json_format_and_no_plot(tmp_path):
    out = tmp_path / "out"
    code = main(["simulate", "--out", str(out), "--format", "json", "--no-plot"])
    assert code == 0
    assert (out / "traces.json").exists()
    assert not (out / "traces.png").exists()


def test_budget_subcommand(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["budget", "--out", str(out)])
    assert code == 0
    data = json.loads((out / "budget.json").read_text())
    assert data["ledger"]["stages"]["after_loss_and_phase_db"] == pytest.approx(8.1)
    assert (out / "budget.png").exists()
    assert "enhancement chain" in capsys.readouterr().out


def test_grid_flag_overrides_grid(tmp_path):
    out = tmp_path / "out"
    code = main(["simulate", "--out", str(out), "--grid", "2e3:5e4:11", "--no-plot"])
    assert code == 0
    lines = (out / "traces.csv").read_text().splitlines()
    assert len(lines) == 12
    assert lines[1].split(",")[0] == "2000"


def test_bad_grid_flag_exits_one(tmp_path, capsys):
    code = main(["simulate", "--out", str(tmp_path), "--grid", "nope"])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_validation_error_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("beamsplitter: {reflectivity: 1.5}\n")
    code = main(["simulate", "--config", str(bad), "--out", str(tmp_path)])
    assert code == 1
    assert "beamsplitter" in capsys.readouterr().err


def test_missing_config_exits_two(tmp_path, capsys):
    code = main(["simulate", "--config", str(tmp_path / "absent.yaml"), "--out", str(tmp_path)])
    assert code == 2
    assert "i/o error" in capsys.readouterr().err


def test_user_override_tagged_in_echo(tmp_path, capsys):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("detection: {power_w: 1.0e-4}\n")
    code = main(["budget", "--config", str(cfg), "--out", str(tmp_path), "--no-plot"])
    assert code == 0
    stdout = capsys.readouterr().out
    assert "detection.power_w = 0.0001  [user]" in stdout
    assert "detection.wavelength_m = 1.55e-06  [paper-default]" in stdout


def test_seed_flag_accepted(tmp_path):
    code = main(["simulate", "--out", str(tmp_path), "--seed", "7", "--no-plot"])
    assert code == 0


def test_reruns_are_byte_identical(tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["simulate", "--out", str(out1), "--format", "json", "--no-plot"]) == 0
    assert main(["simulate", "--out", str(out2), "--format", "json", "--no-plot"]) == 0
    assert (out1 / "traces.json").read_bytes() == (out2 / "traces.json").read_bytes()
    assert (out1 / "budget.json").read_bytes() == (out2 / "budget.json").read_bytes()
