"""Command-line interface.

Subcommands:
    simulate   run a scenario and export the trace family plus the budget
    budget     export the degradation budget only

Exit codes: 0 success, 1 configuration/validation error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError
from .report import export_budget, export_traces
from .scenario import load_config, run_scenario, with_grid_override

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sqzfilter",
        description=(
            "Frequency-domain simulator and noise-budget engine for "
            "squeezed-light-assisted laser phase-noise stabilization loops."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", default=None,
                       help="scenario file (YAML); omit for the reference scenario")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory")
        p.add_argument("--grid", metavar="FMIN:FMAX:N", default=None,
                       help="override the frequency grid")
        p.add_argument("--seed", type=int, default=None,
                       help="reserved; outputs are fully deterministic")
        p.add_argument("--no-plot", action="store_true", help="skip figure rendering")

    sim = sub.add_parser("simulate", help="synthesize the eight-trace family")
    common(sim)
    sim.add_argument("--format", choices=("csv", "json"), default="csv",
                     help="trace file format (budget is always JSON)")

    bud = sub.add_parser("budget", help="export the degradation budget only")
    common(bud)

    return parser


def _parse_grid_flag(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--grid expects FMIN:FMAX:N, got '{text}'")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"--grid expects numeric FMIN:FMAX:N, got '{text}'") from None


def _load(args):
    config = load_config(args.config)
    if args.grid is not None:
        config = with_grid_override(config, *_parse_grid_flag(args.grid))
    return config


def _print_echo(config):
    for entry in config.echo:
        print(f"{entry.path} = {entry.value}  [{entry.source}]")


def _cmd_simulate(args) -> int:
    config = _load(args)
    _print_echo(config)
    result = run_scenario(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace_path = export_traces(result, out_dir / f"traces.{args.format}", fmt=args.format)
    budget_path = export_budget(result.budget, out_dir / "budget.json")
    written = [trace_path, budget_path]
    if not args.no_plot:
        from .plotting import render_traces_figure

        written.append(render_traces_figure(result.traces, out_dir / "traces.png"))
    print(f"servo unity gain: {result.servo.unity_gain_hz:.6g} Hz "
          f"({'calibrated' if config.servo_calibrated else 'user'})")
    for path in written:
        print(f"wrote {path}")
    return 0


def _cmd_budget(args) -> int:
    config = _load(args)
    _print_echo(config)
    from .scenario import build_budget_report

    report = build_budget_report(config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = [export_budget(report, out_dir / "budget.json")]
    if not args.no_plot:
        from .plotting import render_budget_figure

        written.append(render_budget_figure(report, out_dir / "budget.png"))
    stages = report.stages
    print(
        "enhancement chain [dB]: "
        f"{report.ledger.initial_squeezing_db:.2f} -> {stages.after_loss_and_phase_db:.2f} "
        f"-> {stages.after_coupling_db:.2f} -> {stages.measured_db:.2f}"
    )
    for path in written:
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_budget(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
