"""Scenario assembly: configuration, noise-floor synthesis, and the trace family.

A scenario bundles every parameter of the stabilization experiment.  The
configuration file is hierarchical YAML; any omitted parameter falls back
to the bundled reference values (tagged ``paper-default`` in the echo).
``run_scenario`` produces the eight-trace family:

    a  free-running frequency noise (Hz^2/Hz)
    b  classical closed-loop reference, pinned at the in-loop shot level
    c  quantum-enhanced closed loop (ledger-chain enhancement)
    d  reference scaled by the pre-coupling enhancement
    e  servo-suppressed in-loop phase residual
    f  residual amplitude noise floor
    g  electronic noise floor
    h  uncorrelated sum of d, e, f, g

Traces b through h are RIN densities referred to the in-loop readout; the
witness-cavity conversion is mapped onto the in-loop scale with the
cross-cavity normalization factor.
"""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import yaml
from scipy.optimize import brentq

from .budget import (
    BudgetEntry,
    EnhancementLedger,
    LedgerStages,
    coupling_fraction_total,
    ledger_chain,
    total_efficiency,
    total_phase_fluctuation,
)
from .errors import ConfigError
from .loop import (
    DetectionParams,
    NoiseFloors,
    ServoModel,
    cross_cavity_normalization,
    freq_noise_from_phase,
    shot_noise_rsn2,
    suppression_factor,
)
from .optics import (
    BeamSplitter,
    CavityParams,
    QuadratureVariances,
    SqueezerParams,
    apply_loss,
    apply_phase_jitter,
    rotation_angle,
)
from .spectra import (
    FrequencyGrid,
    Spectrum,
    Unit,
    db_from_linear,
    linear_from_db,
    log_spaced_grid,
    uncorrelated_sum,
)

__all__ = [
    "GridSpec",
    "PowerLawSegment",
    "FloorSpec",
    "FloorSet",
    "ScenarioConfig",
    "EchoEntry",
    "TraceSet",
    "BudgetReport",
    "ScenarioResult",
    "TRACE_ORDER",
    "TRACE_LABELS",
    "load_config",
    "config_from_mapping",
    "with_grid_override",
    "synthesize_floor",
    "floor_level_db",
    "run_scenario",
    "build_budget_report",
]

# Frequency at which the cross-coupling percentages are quoted and at which
# the servo unity-gain frequency is calibrated when not set explicitly.
COUPLING_ANCHOR_HZ = 8e3

# Coupling-row names the default floor levels and the servo calibration
# target are derived from.
ROW_ELECTRONIC = "electronic_noise"
ROW_RESIDUAL_AMPLITUDE = "residual_amplitude_noise"
ROW_INLOOP_FREQUENCY = "inloop_frequency_noise"

# Bounds for the unity-gain calibration root solve, as multiples of the
# anchor frequency.
_CAL_FUG_LO = 1e-3
_CAL_FUG_HI = 1e9

_DEFAULT_EFFICIENCY_ROWS = (
    ("opo_escape", 0.97, 0.005),
    ("interference", 0.985, 0.002),
    ("photodiode_quantum", 0.99, 0.002),
    ("overcoupled_cavity", 0.984, 0.005),
    ("propagation", 0.96, 0.005),
)
_DEFAULT_JITTER_ROWS = (
    ("opo_cavity_length", 2.0, 0.3),
    ("squeezed_vs_shifted_light", 7.0, 0.5),
    ("squeezed_vs_local_oscillator", 11.0, 0.6),
)
_DEFAULT_COUPLING_ROWS = (
    (ROW_ELECTRONIC, 2.3, 0.1),
    (ROW_RESIDUAL_AMPLITUDE, 6.2, 0.2),
    (ROW_INLOOP_FREQUENCY, 2.1, 0.5),
)

# Free-running phase noise default: one power-law segment falling as f^-4
# in rad^2/Hz, anchored at 0.01 rad^2/Hz at 1 kHz (a frequency noise of
# 1e4 Hz^2/Hz at 1 kHz falling as 1/f^2).
_DEFAULT_PHASE_SEGMENTS = ((1e3, -4.0, -20.0),)


@dataclass(frozen=True)
class GridSpec:
    f_min_hz: float
    f_max_hz: float
    points: int

    def build(self) -> FrequencyGrid:
        return log_spaced_grid(self.f_min_hz, self.f_max_hz, self.points)


@dataclass(frozen=True)
class PowerLawSegment:
    """One floor segment: density level_db at corner_hz, sloping as f**exponent."""

    corner_hz: float
    exponent: float
    level_db: float

    def __post_init__(self):
        if not (self.corner_hz > 0.0 and math.isfinite(self.corner_hz)):
            raise ValueError("segment corner must be a positive frequency")
        if not math.isfinite(self.exponent) or not math.isfinite(self.level_db):
            raise ValueError("segment exponent and level must be finite")


@dataclass(frozen=True)
class FloorSpec:
    """A noise floor: either one flat dB level or piecewise power-law segments."""

    flat_db: Optional[float] = None
    segments: Tuple[PowerLawSegment, ...] = ()

    def __post_init__(self):
        if (self.flat_db is None) == (not self.segments):
            raise ValueError("floor needs exactly one of flat_db or segments")
        if self.segments:
            corners = [s.corner_hz for s in self.segments]
            if any(b <= a for a, b in zip(corners, corners[1:])):
                raise ValueError("segment corners must be strictly increasing")
            for a, b in zip(self.segments, self.segments[1:]):
                expected = a.level_db + 10.0 * a.exponent * math.log10(b.corner_hz / a.corner_hz)
                if abs(expected - b.level_db) > 1e-6:
                    raise ValueError(
                        f"discontinuous floor at corner {b.corner_hz:g} Hz: "
                        f"segment extrapolates to {expected:.6f} dB, next level is {b.level_db:.6f} dB"
                    )


def floor_level_db(spec: FloorSpec, f) -> np.ndarray:
    """Analytic floor level in dB at frequency f (scalar or array).

    Below the first corner the first segment's power law extrapolates.
    """
    farr = np.asarray(f, dtype=float)
    if np.any(farr <= 0.0):
        raise ValueError("floor evaluation requires f > 0")
    if spec.flat_db is not None:
        out = np.full(farr.shape, spec.flat_db)
    else:
        corners = np.array([s.corner_hz for s in spec.segments])
        levels = np.array([s.level_db for s in spec.segments])
        exps = np.array([s.exponent for s in spec.segments])
        idx = np.clip(np.searchsorted(corners, farr, side="right") - 1, 0, None)
        out = levels[idx] + 10.0 * exps[idx] * np.log10(farr / corners[idx])
    return float(out) if farr.ndim == 0 else out


def synthesize_floor(spec: FloorSpec, grid: FrequencyGrid, unit: Unit) -> Spectrum:
    """Evaluate a floor spec on a grid as a linear-unit Spectrum."""
    if not unit.is_linear:
        raise ValueError("floors are synthesized in linear units")
    return Spectrum(grid, linear_from_db(floor_level_db(spec, grid.points)), unit)


@dataclass(frozen=True)
class FloorSet:
    residual_amplitude: FloorSpec
    electronic: FloorSpec
    free_running_phase: FloorSpec


@dataclass(frozen=True)
class EchoEntry:
    """One configuration parameter with its provenance ('user' or 'paper-default')."""

    path: str
    value: str
    source: str


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    grid: GridSpec
    detection: DetectionParams
    beamsplitter: BeamSplitter
    inloop_cavity: CavityParams
    outofloop_cavity: CavityParams
    squeezer: SqueezerParams
    jitter_mode: str
    servo: ServoModel
    servo_calibrated: bool
    floors: FloorSet
    efficiency_rows: Tuple[BudgetEntry, ...]
    jitter_rows: Tuple[BudgetEntry, ...]
    coupling_rows: Tuple[BudgetEntry, ...]
    stated_efficiency: Optional[float]
    stated_efficiency_unc: Optional[float]
    stated_phase_mrad: Optional[float]
    stated_phase_unc: Optional[float]
    stated_coupling_percent: Optional[float]
    stated_coupling_unc: Optional[float]
    ledger: EnhancementLedger
    echo: Tuple[EchoEntry, ...] = field(repr=False, default=())


# ---------------------------------------------------------------------------
# configuration parsing


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.10g}"
    return str(value)


class _Node:
    """One mapping level of the config file; tracks consumed keys."""

    def __init__(self, raw, path: str):
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path or 'top level'}: expected a mapping")
        self._raw = dict(raw)
        self.path = path

    def child(self, key: str) -> "_Node":
        sub = self._raw.pop(key, None)
        return _Node(sub, f"{self.path}.{key}" if self.path else key)

    def take(self, key: str):
        """Returns (value, present)."""
        if key in self._raw:
            return self._raw.pop(key), True
        return None, False

    def finish(self):
        if self._raw:
            name = sorted(self._raw)[0]
            where = self.path or "top level"
            raise ConfigError(f"unknown key '{name}' in {where}")


class _Echo:
    def __init__(self):
        self.entries = []

    def add(self, path: str, value, user: bool):
        self.entries.append(EchoEntry(path, _fmt(value), "user" if user else "paper-default"))


def _scalar(node: _Node, echo: _Echo, key: str, default, conv=float, allow_none=False):
    raw, present = node.take(key)
    path = f"{node.path}.{key}"
    if not present:
        value = default
    elif raw is None:
        if not allow_none:
            raise ConfigError(f"{path}: null is not allowed")
        value = None
    else:
        try:
            value = conv(raw)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from None
    echo.add(path, value, present)
    return value


def _entry_rows(node: _Node, echo: _Echo, key: str, kind: str, defaults) -> Tuple[BudgetEntry, ...]:
    raw, present = node.take(key)
    path = f"{node.path}.{key}" if node.path else key
    if not present:
        rows = defaults
    else:
        if not isinstance(raw, list):
            raise ConfigError(f"{path}: expected a list of entries")
        rows = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict):
                raise ConfigError(f"{path}[{i}]: expected a mapping with name/value")
            extra = set(item) - {"name", "value", "uncertainty"}
            if extra:
                raise ConfigError(f"{path}[{i}]: unknown key '{sorted(extra)[0]}'")
            if "name" not in item or "value" not in item:
                raise ConfigError(f"{path}[{i}]: entries need 'name' and 'value'")
            rows.append((str(item["name"]), float(item["value"]), float(item.get("uncertainty", 0.0))))
    entries = []
    for name, value, unc in rows:
        try:
            entries.append(BudgetEntry(name, kind, value, unc))
        except ValueError as exc:
            raise ConfigError(f"{path}[{name}]: {exc}") from None
        echo.add(f"{path}[{name}]", f"{value:.10g} +- {unc:.10g}", present)
    if not entries:
        echo.add(path, "(none)", present)
    return tuple(entries)


def _parse_floor(node: _Node, echo: _Echo, key: str, derived_default: Optional[FloorSpec],
                 default_note: str) -> FloorSpec:
    raw, present = node.take(key)
    path = f"{node.path}.{key}"
    if not present or raw is None:
        if derived_default is None:
            raise ConfigError(
                f"{path}: no default available ({default_note}); set the floor explicitly"
            )
        echo.add(path, default_note, False)
        return derived_default
    sub = _Node(raw, path)
    flat, has_flat = sub.take("flat_db")
    segs_raw, has_segs = sub.take("segments")
    sub.finish()
    if has_flat == has_segs:
        raise ConfigError(f"{path}: give exactly one of flat_db or segments")
    try:
        if has_flat:
            spec = FloorSpec(flat_db=float(flat))
            echo.add(path, f"flat {float(flat):.10g} dB", True)
        else:
            if not isinstance(segs_raw, list) or not segs_raw:
                raise ValueError("segments must be a non-empty list")
            segments = []
            for i, item in enumerate(segs_raw):
                if not isinstance(item, dict):
                    raise ValueError(f"segments[{i}] must be a mapping")
                extra = set(item) - {"corner_hz", "exponent", "level_db"}
                if extra:
                    raise ValueError(f"segments[{i}]: unknown key '{sorted(extra)[0]}'")
                segments.append(
                    PowerLawSegment(
                        float(item["corner_hz"]), float(item["exponent"]), float(item["level_db"])
                    )
                )
            spec = FloorSpec(segments=tuple(segments))
            rendered = "; ".join(
                f"({s.corner_hz:.6g} Hz, f^{s.exponent:g}, {s.level_db:.6g} dB)" for s in segments
            )
            echo.add(path, rendered, True)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return spec


def _row_value(rows: Tuple[BudgetEntry, ...], name: str) -> Optional[float]:
    for e in rows:
        if e.name == name:
            return e.value
    return None


def load_config(path=None) -> ScenarioConfig:
    """Load a scenario configuration, filling defaults for anything omitted.

    path may be None for the pure reference scenario.  Raises ConfigError
    on parse problems (with file location) and on invariant violations
    (naming the offending parameter).
    """
    if path is None:
        raw = {}
    else:
        text = Path(path).read_text(encoding="utf-8")
        try:
            raw = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
            raise ConfigError(f"config parse error{where}: {exc}") from None
        if raw is None:
            raw = {}
    return config_from_mapping(raw)


def config_from_mapping(raw: dict) -> ScenarioConfig:
    """Build a validated configuration from an already-parsed mapping."""
    root = _Node(raw, "")
    echo = _Echo()

    node = root.child("grid")
    f_min = _scalar(node, echo, "f_min_hz", 1e3)
    f_max = _scalar(node, echo, "f_max_hz", 1e5)
    points = _scalar(node, echo, "points", 201, conv=int)
    node.finish()
    grid = GridSpec(f_min, f_max, points)
    try:
        grid.build()
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None

    node = root.child("detection")
    power = _scalar(node, echo, "power_w", 50e-6)
    wavelength = _scalar(node, echo, "wavelength_m", 1550e-9)
    node.finish()
    try:
        detection = DetectionParams(power, wavelength)
    except ValueError as exc:
        raise ConfigError(f"detection: {exc}") from None

    node = root.child("beamsplitter")
    refl, has_refl = node.take("reflectivity")
    trans, has_trans = node.take("transmission")
    node.finish()
    if has_refl and has_trans:
        raise ConfigError("beamsplitter: give reflectivity or transmission, not both")
    try:
        if has_trans:
            bs = BeamSplitter(float(trans), 1.0 - float(trans))
            echo.add("beamsplitter.transmission", float(trans), True)
        else:
            r = float(refl) if has_refl else 0.99
            bs = BeamSplitter.from_reflectivity(r)
            echo.add("beamsplitter.reflectivity", r, has_refl)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"beamsplitter: {exc}") from None

    inloop_cavity = _parse_cavity(
        root.child("inloop_cavity"), echo, 7.5e6, "three_times_half_detuned", 0.016
    )
    outofloop_cavity = _parse_cavity(
        root.child("outofloop_cavity"), echo, 6.8e6, "half_detuned", 0.0
    )

    node = root.child("squeezer")
    squeezing_db = _scalar(node, echo, "squeezing_db", 10.6)
    antisqueezing_db = _scalar(node, echo, "antisqueezing_db", 17.0)
    jitter_mode = _scalar(node, echo, "jitter_mode", "linear_sum", conv=str)
    if jitter_mode not in ("linear_sum", "quadrature_sum"):
        raise ConfigError("squeezer.jitter_mode: must be linear_sum or quadrature_sum")
    efficiency_rows = _entry_rows(node, echo, "efficiencies", "efficiency", _DEFAULT_EFFICIENCY_ROWS)
    jitter_rows = _entry_rows(node, echo, "phase_jitters_mrad", "phase_mrad", _DEFAULT_JITTER_ROWS)
    node.finish()
    try:
        squeezer = SqueezerParams(
            squeezing_db,
            antisqueezing_db,
            {e.name: e.value for e in efficiency_rows},
            {e.name: e.value for e in jitter_rows},
        )
    except ValueError as exc:
        raise ConfigError(f"squeezer: {exc}") from None

    coupling_rows = _entry_rows(root, echo, "coupling_percent", "coupling_percent", _DEFAULT_COUPLING_ROWS)

    node = root.child("stated_totals")
    stated_eff_pct = _scalar(node, echo, "efficiency_percent", 88.0, allow_none=True)
    stated_eff_unc_pct = _scalar(node, echo, "efficiency_uncertainty_percent", 0.8, allow_none=True)
    stated_phase = _scalar(node, echo, "phase_mrad", 20.0, allow_none=True)
    stated_phase_unc = _scalar(node, echo, "phase_uncertainty_mrad", 0.9, allow_none=True)
    stated_coupling = _scalar(node, echo, "coupling_percent", 10.6, allow_none=True)
    stated_coupling_unc = _scalar(node, echo, "coupling_uncertainty_percent", 0.8, allow_none=True)
    node.finish()

    rsn2 = shot_noise_rsn2(detection)

    node = root.child("floors")
    floors = FloorSet(
        residual_amplitude=_parse_floor(
            node, echo, "residual_amplitude",
            _flat_floor_from_row(coupling_rows, ROW_RESIDUAL_AMPLITUDE, rsn2),
            _floor_note(coupling_rows, ROW_RESIDUAL_AMPLITUDE, rsn2),
        ),
        electronic=_parse_floor(
            node, echo, "electronic",
            _flat_floor_from_row(coupling_rows, ROW_ELECTRONIC, rsn2),
            _floor_note(coupling_rows, ROW_ELECTRONIC, rsn2),
        ),
        free_running_phase=_parse_floor(
            node, echo, "free_running_phase",
            FloorSpec(segments=tuple(PowerLawSegment(*s) for s in _DEFAULT_PHASE_SEGMENTS)),
            "power law (1000 Hz, f^-4, -20 dB re rad^2/Hz)",
        ),
    )
    node.finish()

    node = root.child("servo")
    unity_gain = _scalar(node, echo, "unity_gain_hz", None, allow_none=True)
    slope = _scalar(node, echo, "integrator_slope", 1, conv=int)
    delay = _scalar(node, echo, "delay_s", 0.0)
    low_pass = _scalar(node, echo, "low_pass_hz", None, allow_none=True)
    node.finish()

    node = root.child("ledger")
    loss_db = _scalar(node, echo, "loss_degradation_db", 1.9)
    phase_db = _scalar(node, echo, "phase_degradation_db", 0.6)
    coupling_frac = _scalar(node, echo, "coupling_fraction", None, allow_none=True)
    servo_imp = _scalar(node, echo, "servo_imperfection_db", 0.9)
    node.finish()
    if coupling_frac is None:
        coupling_frac, _ = coupling_fraction_total(coupling_rows)
        echo.add("ledger.coupling_fraction (derived)", coupling_frac, False)
    try:
        ledger = EnhancementLedger(squeezing_db, loss_db, phase_db, coupling_frac, servo_imp)
    except ValueError as exc:
        raise ConfigError(f"ledger: {exc}") from None

    root.finish()

    try:
        if unity_gain is not None:
            servo = ServoModel(unity_gain, slope, delay, low_pass)
            calibrated = False
        else:
            servo = _calibrate_servo(
                slope, delay, low_pass, bs, inloop_cavity, floors.free_running_phase,
                coupling_rows, rsn2,
            )
            calibrated = True
            echo.add("servo.unity_gain_hz (calibrated)", servo.unity_gain_hz, False)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"servo: {exc}") from None

    return ScenarioConfig(
        grid=grid,
        detection=detection,
        beamsplitter=bs,
        inloop_cavity=inloop_cavity,
        outofloop_cavity=outofloop_cavity,
        squeezer=squeezer,
        jitter_mode=jitter_mode,
        servo=servo,
        servo_calibrated=calibrated,
        floors=floors,
        efficiency_rows=efficiency_rows,
        jitter_rows=jitter_rows,
        coupling_rows=coupling_rows,
        stated_efficiency=None if stated_eff_pct is None else stated_eff_pct / 100.0,
        stated_efficiency_unc=None if stated_eff_unc_pct is None else stated_eff_unc_pct / 100.0,
        stated_phase_mrad=stated_phase,
        stated_phase_unc=stated_phase_unc,
        stated_coupling_percent=stated_coupling,
        stated_coupling_unc=stated_coupling_unc,
        ledger=ledger,
        echo=tuple(echo.entries),
    )


def _parse_cavity(node: _Node, echo: _Echo, default_fwhm: float, default_detuning: str,
                  default_loss: float) -> CavityParams:
    fwhm = _scalar(node, echo, "linewidth_hz", default_fwhm)
    detuning = _scalar(node, echo, "detuning", default_detuning, conv=str)
    slope = _scalar(node, echo, "slope", None, allow_none=True)
    loss = _scalar(node, echo, "excess_loss", default_loss)
    path = node.path
    node.finish()
    try:
        return CavityParams.from_linewidth_hz(fwhm, detuning, slope, loss)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _flat_floor_from_row(rows, name: str, rsn2: float) -> Optional[FloorSpec]:
    pct = _row_value(rows, name)
    if pct is None or pct <= 0.0:
        return None
    return FloorSpec(flat_db=db_from_linear(pct / 100.0 * rsn2))


def _floor_note(rows, name: str, rsn2: float) -> str:
    pct = _row_value(rows, name)
    if pct is None or pct <= 0.0:
        return f"no positive '{name}' coupling row to derive a level from"
    level = db_from_linear(pct / 100.0 * rsn2)
    return f"flat {level:.6g} dB ({pct:g}% of shot noise, from coupling row '{name}')"


def _calibrate_servo(slope, delay, low_pass, bs, inloop_cavity, phase_floor,
                     coupling_rows, rsn2) -> ServoModel:
    """Choose the unity-gain frequency so the suppressed in-loop phase
    residual at the anchor frequency matches its coupling-row percentage."""
    target_pct = _row_value(coupling_rows, ROW_INLOOP_FREQUENCY)
    if target_pct is None or target_pct <= 0.0:
        raise ConfigError(
            "servo.unity_gain_hz: cannot calibrate without a positive "
            f"'{ROW_INLOOP_FREQUENCY}' coupling row; set unity_gain_hz explicitly"
        )
    if bs.t <= 0.0:
        raise ConfigError("servo.unity_gain_hz: calibration requires a non-zero tap transmission")
    target = target_pct / 100.0 * rsn2
    theta = rotation_angle(inloop_cavity, COUPLING_ANCHOR_HZ)
    converted = theta * theta * linear_from_db(floor_level_db(phase_floor, COUPLING_ANCHOR_HZ))
    need = converted / target
    if need <= 1.0:
        raise ConfigError(
            "servo.unity_gain_hz: converted free-running noise at "
            f"{COUPLING_ANCHOR_HZ:g} Hz is already below the in-loop target; "
            "set unity_gain_hz explicitly"
        )

    def residual(log_fug):
        servo = ServoModel(10.0**log_fug, slope, delay, low_pass)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return suppression_factor(servo, bs, COUPLING_ANCHOR_HZ) - need

    lo = math.log10(COUPLING_ANCHOR_HZ * _CAL_FUG_LO)
    hi = math.log10(COUPLING_ANCHOR_HZ * _CAL_FUG_HI)
    if residual(lo) >= 0.0 or residual(hi) <= 0.0:
        raise ConfigError(
            "servo.unity_gain_hz: calibration could not bracket the target "
            "suppression; set unity_gain_hz explicitly"
        )
    log_fug = brentq(residual, lo, hi, xtol=1e-12, rtol=1e-14)
    return ServoModel(10.0**log_fug, slope, delay, low_pass)


def with_grid_override(config: ScenarioConfig, f_min: float, f_max: float, points: int) -> ScenarioConfig:
    """Replace the grid specification, keeping everything else (used by --grid)."""
    grid = GridSpec(f_min, f_max, points)
    try:
        grid.build()
    except ValueError as exc:
        raise ConfigError(f"grid: {exc}") from None
    echo = [e for e in config.echo if not e.path.startswith("grid.")]
    for key, val in (("f_min_hz", f_min), ("f_max_hz", f_max), ("points", points)):
        echo.append(EchoEntry(f"grid.{key}", _fmt(val), "user"))
    return dataclasses.replace(config, grid=grid, echo=tuple(echo))


# ---------------------------------------------------------------------------
# trace synthesis and budget report

TRACE_ORDER = (
    ("a", "free_running"),
    ("b", "classical_reference"),
    ("c", "quantum_enhanced"),
    ("d", "simulated_enhancement"),
    ("e", "inloop_residual"),
    ("f", "residual_amplitude"),
    ("g", "electronic"),
    ("h", "limit_sum"),
)

TRACE_LABELS = {
    "a": "Free-running frequency noise",
    "b": "Classical stabilization reference",
    "c": "Quantum-enhanced noise",
    "d": "Simulated squeezing enhancement",
    "e": "In-loop residual during loop operation",
    "f": "Residual amplitude noise",
    "g": "Electronic noise",
    "h": "Uncorrelated sum of limiting sources (d,e,f,g)",
}


@dataclass(frozen=True, eq=False)
class TraceSet:
    """The eight named spectra of the result figure, on one grid."""

    grid: FrequencyGrid
    free_running: Spectrum
    classical_reference: Spectrum
    quantum_enhanced: Spectrum
    simulated_enhancement: Spectrum
    inloop_residual: Spectrum
    residual_amplitude: Spectrum
    electronic: Spectrum
    limit_sum: Spectrum

    def by_letter(self, letter: str) -> Spectrum:
        for key, attr in TRACE_ORDER:
            if key == letter:
                return getattr(self, attr)
        raise KeyError(letter)

    def items(self):
        for key, attr in TRACE_ORDER:
            yield key, getattr(self, attr)


@dataclass(frozen=True, eq=False)
class BudgetReport:
    """Everything the budget export writes: entries, totals, chain, and
    the disagreements between the additive ledger and the variance model."""

    efficiency_rows: Tuple[BudgetEntry, ...]
    efficiency_total: float
    efficiency_total_unc: float
    stated_efficiency: Optional[float]
    stated_efficiency_unc: Optional[float]
    phase_rows: Tuple[BudgetEntry, ...]
    phase_linear_mrad: float
    phase_linear_unc: float
    phase_quadrature_mrad: float
    phase_quadrature_unc: float
    stated_phase_mrad: Optional[float]
    stated_phase_unc: Optional[float]
    coupling_rows: Tuple[BudgetEntry, ...]
    coupling_fraction: float
    coupling_fraction_unc: float
    stated_coupling_percent: Optional[float]
    stated_coupling_unc: Optional[float]
    ledger: EnhancementLedger
    stages: LedgerStages
    shot_noise_rin2: float
    shot_noise_db: float
    physical_detected: QuadratureVariances
    physical_assumed_efficiency: float
    physical_loss_degradation_db: float
    physical_jitter_degradation_db: float
    physical_detected_squeezing_db: float
    discrepancies: Tuple[dict, ...]

    def to_dict(self) -> dict:
        def rows(entries):
            return [
                {"name": e.name, "value": e.value, "uncertainty": e.uncertainty}
                for e in entries
            ]

        return {
            "schema_version": 1,
            "shot_noise": {
                "rin2_per_hz": self.shot_noise_rin2,
                "level_db_per_hz": self.shot_noise_db,
            },
            "efficiency": {
                "entries": rows(self.efficiency_rows),
                "total": self.efficiency_total,
                "uncertainty": self.efficiency_total_unc,
                "stated_total": self.stated_efficiency,
                "stated_uncertainty": self.stated_efficiency_unc,
            },
            "phase_fluctuation_mrad": {
                "entries": rows(self.phase_rows),
                "linear_sum": {"total": self.phase_linear_mrad, "uncertainty": self.phase_linear_unc},
                "quadrature_sum": {
                    "total": self.phase_quadrature_mrad,
                    "uncertainty": self.phase_quadrature_unc,
                },
                "stated_total": self.stated_phase_mrad,
                "stated_uncertainty": self.stated_phase_unc,
            },
            "cross_coupling": {
                "entries": rows(self.coupling_rows),
                "total_fraction": self.coupling_fraction,
                "uncertainty": self.coupling_fraction_unc,
                "stated_total_percent": self.stated_coupling_percent,
                "stated_uncertainty_percent": self.stated_coupling_unc,
            },
            "ledger": {
                "initial_squeezing_db": self.ledger.initial_squeezing_db,
                "loss_degradation_db": self.ledger.loss_degradation_db,
                "phase_degradation_db": self.ledger.phase_degradation_db,
                "coupling_fraction": self.ledger.coupling_fraction,
                "servo_imperfection_db": self.ledger.servo_imperfection_db,
                "stages": {
                    "after_loss_and_phase_db": self.stages.after_loss_and_phase_db,
                    "after_coupling_db": self.stages.after_coupling_db,
                    "measured_db": self.stages.measured_db,
                },
                "flags": list(self.stages.flags),
            },
            "physical_model": {
                "assumed_total_efficiency": self.physical_assumed_efficiency,
                "detected_s_x": self.physical_detected.s_x,
                "detected_s_y": self.physical_detected.s_y,
                "detected_squeezing_db": self.physical_detected_squeezing_db,
                "loss_degradation_db": self.physical_loss_degradation_db,
                "jitter_degradation_db": self.physical_jitter_degradation_db,
            },
            "discrepancies": [dict(d) for d in self.discrepancies],
        }


@dataclass(frozen=True, eq=False)
class ScenarioResult:
    traces: TraceSet
    budget: BudgetReport
    servo: ServoModel
    normalization: float
    config: ScenarioConfig


# Disagreements smaller than these thresholds are not reported.
_EFFICIENCY_DISCREPANCY_TOL = 2e-3
_LOSS_DISCREPANCY_TOL_DB = 0.1


def build_budget_report(config: ScenarioConfig) -> BudgetReport:
    """Assemble the full degradation budget for a scenario."""
    eff_total, eff_unc = total_efficiency(config.efficiency_rows)
    phase_lin, phase_lin_unc = total_phase_fluctuation(config.jitter_rows, "linear_sum")
    phase_quad, phase_quad_unc = total_phase_fluctuation(config.jitter_rows, "quadrature_sum")
    coupling, coupling_unc = coupling_fraction_total(config.coupling_rows)
    stages = ledger_chain(config.ledger)
    rsn2 = shot_noise_rsn2(config.detection)

    s0 = config.squeezer.squeezing_db
    eta_assumed = config.stated_efficiency if config.stated_efficiency is not None else eff_total
    initial = QuadratureVariances(linear_from_db(-s0), linear_from_db(config.squeezer.antisqueezing_db))
    after_loss = apply_loss(initial, eta_assumed)
    detected = apply_phase_jitter(after_loss, config.squeezer.combined_jitter_rad(config.jitter_mode))
    loss_deg = s0 - (-db_from_linear(after_loss.s_x))
    jitter_deg = (-db_from_linear(after_loss.s_x)) - (-db_from_linear(detected.s_x))

    discrepancies = []
    if (
        config.stated_efficiency is not None
        and abs(eff_total - config.stated_efficiency) > _EFFICIENCY_DISCREPANCY_TOL
    ):
        discrepancies.append(
            {
                "kind": "efficiency_product",
                "computed": eff_total,
                "stated": config.stated_efficiency,
                "message": (
                    f"product of the efficiency entries is {eff_total:.4f}, "
                    f"the stated total is {config.stated_efficiency:.4f}"
                ),
            }
        )
    if abs(config.ledger.loss_degradation_db - loss_deg) > _LOSS_DISCREPANCY_TOL_DB:
        discrepancies.append(
            {
                "kind": "loss_degradation_model",
                "ledger_db": config.ledger.loss_degradation_db,
                "physical_db": loss_deg,
                "message": (
                    f"ledger books {config.ledger.loss_degradation_db:.2f} dB of loss degradation; "
                    f"the variance model with efficiency {eta_assumed:.4f} gives {loss_deg:.2f} dB"
                ),
            }
        )

    return BudgetReport(
        efficiency_rows=config.efficiency_rows,
        efficiency_total=eff_total,
        efficiency_total_unc=eff_unc,
        stated_efficiency=config.stated_efficiency,
        stated_efficiency_unc=config.stated_efficiency_unc,
        phase_rows=config.jitter_rows,
        phase_linear_mrad=phase_lin,
        phase_linear_unc=phase_lin_unc,
        phase_quadrature_mrad=phase_quad,
        phase_quadrature_unc=phase_quad_unc,
        stated_phase_mrad=config.stated_phase_mrad,
        stated_phase_unc=config.stated_phase_unc,
        coupling_rows=config.coupling_rows,
        coupling_fraction=coupling,
        coupling_fraction_unc=coupling_unc,
        stated_coupling_percent=config.stated_coupling_percent,
        stated_coupling_unc=config.stated_coupling_unc,
        ledger=config.ledger,
        stages=stages,
        shot_noise_rin2=rsn2,
        shot_noise_db=db_from_linear(rsn2),
        physical_detected=detected,
        physical_assumed_efficiency=eta_assumed,
        physical_loss_degradation_db=loss_deg,
        physical_jitter_degradation_db=jitter_deg,
        physical_detected_squeezing_db=-db_from_linear(detected.s_x),
        discrepancies=tuple(discrepancies),
    )


def run_scenario(config: ScenarioConfig) -> ScenarioResult:
    """Synthesize the eight-trace family and the budget report."""
    grid = config.grid.build()
    rsn2 = shot_noise_rsn2(config.detection)

    residual_fl = synthesize_floor(config.floors.residual_amplitude, grid, Unit.RIN)
    electronic_fl = synthesize_floor(config.floors.electronic, grid, Unit.RIN)
    phase_fl = synthesize_floor(config.floors.free_running_phase, grid, Unit.PHASE_NOISE)
    NoiseFloors(residual_fl, electronic_fl, phase_fl)  # cross-validate units and grids

    norm = cross_cavity_normalization(config.inloop_cavity, config.outofloop_cavity)

    # (a) the free-running phase floor expressed as frequency noise
    free_running = freq_noise_from_phase(phase_fl)

    # (e) witness-converted phase residual under loop suppression, mapped
    # onto the in-loop readout scale with the cross-cavity factor
    theta_out = rotation_angle(config.outofloop_cavity, grid.points)
    supp = suppression_factor(config.servo, config.beamsplitter, grid.points)
    inloop_residual = Spectrum(
        grid, norm * theta_out * theta_out * phase_fl.values / supp, Unit.RIN
    )

    # (b)-(d): the closed-loop noise floor referred to the in-loop readout
    # is pinned at the shot-noise density; enhancements scale it by the
    # ledger-chain stages.
    stages = ledger_chain(config.ledger)
    classical = Spectrum(grid, np.full(len(grid), rsn2), Unit.RIN)
    simulated = Spectrum(
        grid, classical.values * linear_from_db(-stages.after_loss_and_phase_db), Unit.RIN
    )
    enhanced = Spectrum(grid, classical.values * linear_from_db(-stages.measured_db), Unit.RIN)

    limit_sum = uncorrelated_sum([simulated, inloop_residual, residual_fl, electronic_fl])

    traces = TraceSet(
        grid=grid,
        free_running=free_running,
        classical_reference=classical,
        quantum_enhanced=enhanced,
        simulated_enhancement=simulated,
        inloop_residual=inloop_residual,
        residual_amplitude=residual_fl,
        electronic=electronic_fl,
        limit_sum=limit_sum,
    )
    return ScenarioResult(
        traces=traces,
        budget=build_budget_report(config),
        servo=config.servo,
        normalization=norm,
        config=config,
    )
