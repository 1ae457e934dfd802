"""Tests for the CSV/JSON exports and their determinism."""

import json

import numpy as np
import pytest

from sqzfilter import (
    export_budget,
    export_traces,
    load_config,
    load_traces,
    run_scenario,
    uncorrelated_sum,
)
from sqzfilter.report import CSV_HEADER, traces_to_csv


@pytest.fixture(scope="module")
def result():
    return run_scenario(load_config(None))


@pytest.fixture(scope="module")
def small_result():
    from sqzfilter import with_grid_override

    return run_scenario(with_grid_override(load_config(None), 1e3, 1e5, 2))


def test_csv_shape_and_header(small_result):
    text = traces_to_csv(small_result.traces)
    lines = text.splitlines()
    assert lines[0] == CSV_HEADER
    assert lines[0] == (
        "freq_hz,trace_a,trace_b,trace_c,trace_d,trace_e,trace_f,trace_g,trace_h"
    )
    assert len(lines) == 3  # header + one row per grid point
    assert text.endswith("\n") and "\r" not in text
    assert len(lines[1].split(",")) == 9


def test_csv_values_are_db_with_six_digits(small_result):
    text = traces_to_csv(small_result.traces)
    first_row = text.splitlines()[1].split(",")
    assert first_row[0] == "1000"
    assert first_row[2] == "-142.902"  # trace b at the shot-noise level


def test_csv_export_deterministic(tmp_path):
    cfg = load_config(None)
    p1 = export_traces(run_scenario(cfg), tmp_path / "a.csv", fmt="csv")
    p2 = export_traces(run_scenario(load_config(None)), tmp_path / "b.csv", fmt="csv")
    assert p1.read_bytes() == p2.read_bytes()


def test_json_export_deterministic_and_round_trips(tmp_path, result):
    p1 = export_traces(result, tmp_path / "a.json", fmt="json")
    p2 = export_traces(run_scenario(load_config(None)), tmp_path / "b.json", fmt="json")
    assert p1.read_bytes() == p2.read_bytes()

    loaded = load_traces(p1)
    for (key, original), (_, back) in zip(result.traces.items(), loaded.items()):
        assert back.unit is original.unit
        assert np.allclose(back.values, original.values, rtol=1e-12)
    assert np.array_equal(loaded.grid.points, result.traces.grid.points)


def test_json_carries_units_and_metadata(tmp_path, result):
    path = export_traces(result, tmp_path / "t.json", fmt="json")
    data = json.loads(path.read_text())
    assert data["schema_version"] == 1
    assert data["traces"]["a"]["unit"] == "freq_noise_db_re_hz2_per_hz"
    assert data["traces"]["b"]["unit"] == "rin_db_per_hz"
    assert "cross_cavity_normalization_db" in data["metadata"]
    assert data["metadata"]["servo_unity_gain_hz"] == result.servo.unity_gain_hz


def test_limit_sum_reverified_after_round_trip(tmp_path, result):
    path = export_traces(result, tmp_path / "t.json", fmt="json")
    loaded = load_traces(path)
    recomputed = uncorrelated_sum(
        [
            loaded.simulated_enhancement,
            loaded.inloop_residual,
            loaded.residual_amplitude,
            loaded.electronic,
        ]
    )
    ratio = recomputed.values / loaded.limit_sum.values
    assert np.allclose(ratio, 1.0, rtol=1e-9)


def test_unknown_format_rejected(tmp_path, result):
    with pytest.raises(ValueError):
        export_traces(result, tmp_path / "t.xml", fmt="xml")


def test_budget_json_schema(tmp_path, result):
    path = export_budget(result.budget, tmp_path / "budget.json")
    data = json.loads(path.read_text())
    assert data["schema_version"] == 1
    assert {e["name"] for e in data["efficiency"]["entries"]} == {
        "opo_escape",
        "interference",
        "photodiode_quantum",
        "overcoupled_cavity",
        "propagation",
    }
    assert data["efficiency"]["total"] == pytest.approx(0.8935, abs=0.0005)
    assert data["phase_fluctuation_mrad"]["linear_sum"]["total"] == 20.0
    assert data["phase_fluctuation_mrad"]["quadrature_sum"]["total"] == pytest.approx(
        13.19, abs=0.01
    )
    assert data["cross_coupling"]["total_fraction"] == pytest.approx(0.106)
    stages = data["ledger"]["stages"]
    assert stages["after_loss_and_phase_db"] == pytest.approx(8.1)
    assert stages["after_coupling_db"] == pytest.approx(5.84, abs=0.15)
    assert stages["measured_db"] == pytest.approx(5.0, abs=0.15)
    assert len(data["discrepancies"]) == 2


def test_budget_json_deterministic(tmp_path, result):
    p1 = export_budget(result.budget, tmp_path / "b1.json")
    p2 = export_budget(run_scenario(load_config(None)).budget, tmp_path / "b2.json")
    assert p1.read_bytes() == p2.read_bytes()
