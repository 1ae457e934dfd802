"""Deterministic file export of the trace family and the budget report.

CSV and JSON outputs are byte-for-byte reproducible for identical inputs:
fixed column order, fixed key order, LF line endings, and no timestamps.
Trace values are written in dB units with 6 significant digits in the CSV;
the JSON carries the same dB values at full precision together with unit
metadata, so a round trip reconstructs the trace set.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .scenario import TRACE_LABELS, TRACE_ORDER, BudgetReport, ScenarioResult, TraceSet
from .spectra import FrequencyGrid, Spectrum, Unit, db_from_linear, linear_from_db

__all__ = [
    "CSV_HEADER",
    "traces_to_csv",
    "traces_to_json_dict",
    "export_traces",
    "load_traces",
    "export_budget",
]

CSV_HEADER = "freq_hz," + ",".join(f"trace_{key}" for key, _ in TRACE_ORDER)

# dB tag written in the JSON export for each linear unit.
_DB_UNIT_NAME = {
    Unit.RIN: Unit.RIN_DB.value,
    Unit.FREQ_NOISE: Unit.FREQ_NOISE_DB.value,
    Unit.PHASE_NOISE: "phase_noise_db_re_rad2_per_hz",
}
_LINEAR_UNIT_OF = {v: k for k, v in _DB_UNIT_NAME.items()}


def _db_values(spectrum: Spectrum) -> np.ndarray:
    if spectrum.unit.is_db:
        return np.asarray(spectrum.values)
    return db_from_linear(spectrum.values)


def traces_to_csv(traces: TraceSet) -> str:
    """Render the trace set as CSV text (dB values, 6 significant digits)."""
    columns = [traces.grid.points] + [_db_values(s) for _, s in traces.items()]
    lines = [CSV_HEADER]
    for row in zip(*columns):
        lines.append(",".join(f"{v:.6g}" for v in row))
    return "\n".join(lines) + "\n"


def traces_to_json_dict(traces: TraceSet, metadata: dict | None = None) -> dict:
    """JSON-ready mapping with dB values and unit tags per trace."""
    out = {
        "schema_version": 1,
        "frequency_hz": [float(v) for v in traces.grid.points],
        "traces": {},
    }
    for key, spectrum in traces.items():
        out["traces"][key] = {
            "label": TRACE_LABELS[key],
            "unit": _DB_UNIT_NAME[spectrum.unit],
            "values_db": [float(v) for v in _db_values(spectrum)],
        }
    if metadata:
        out["metadata"] = dict(metadata)
    return out


def _dump_json(obj: dict) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def export_traces(result_or_traces, out_path, fmt: str = "csv", metadata: dict | None = None) -> Path:
    """Write the trace set to out_path in 'csv' or 'json' format."""
    if isinstance(result_or_traces, ScenarioResult):
        traces = result_or_traces.traces
        if metadata is None:
            metadata = {
                "cross_cavity_normalization_db": db_from_linear(result_or_traces.normalization),
                "servo_unity_gain_hz": result_or_traces.servo.unity_gain_hz,
                "shot_noise_db_per_hz": result_or_traces.budget.shot_noise_db,
            }
    else:
        traces = result_or_traces
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown trace format '{fmt}'")
    path = Path(out_path)
    if fmt == "csv":
        text = traces_to_csv(traces)
    else:
        text = _dump_json(traces_to_json_dict(traces, metadata))
    path.write_text(text, encoding="utf-8", newline="\n")
    return path


def load_traces(path) -> TraceSet:
    """Rebuild a TraceSet from a JSON trace export (linear-unit spectra)."""
    from .scenario import TraceSet as _TraceSet  # local alias for constructing

    data = json.loads(Path(path).read_text(encoding="utf-8"))
    grid = FrequencyGrid(np.array(data["frequency_hz"], dtype=float))
    kwargs = {"grid": grid}
    for key, attr in TRACE_ORDER:
        entry = data["traces"][key]
        unit = _LINEAR_UNIT_OF[entry["unit"]]
        values = linear_from_db(np.array(entry["values_db"], dtype=float))
        kwargs[attr] = Spectrum(grid, values, unit)
    return _TraceSet(**kwargs)


def export_budget(report: BudgetReport, out_path) -> Path:
    """Write the budget report as JSON."""
    path = Path(out_path)
    path.write_text(_dump_json(report.to_dict()), encoding="utf-8", newline="\n")
    return path
