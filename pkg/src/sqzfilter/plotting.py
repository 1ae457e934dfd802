"""Figure rendering for the trace family and the budget chain.

Uses matplotlib's object-oriented API with the Agg canvas directly, so no
interactive backend is ever touched.
"""

from __future__ import annotations

from pathlib import Path

from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

from .scenario import TRACE_LABELS, BudgetReport, TraceSet

__all__ = ["render_traces_figure", "render_budget_figure"]

_RIN_TRACES = "bcdefgh"


def render_traces_figure(traces: TraceSet, out_path) -> Path:
    """Two stacked panels: frequency noise on top, the RIN family below."""
    fig = Figure(figsize=(8.0, 7.5))
    ax_freq, ax_rin = fig.subplots(
        2, 1, sharex=True, gridspec_kw={"height_ratios": [1, 2.2]}
    )

    f = traces.grid.points
    a_db = traces.free_running.to_db()
    ax_freq.semilogx(f, a_db.values, color="tab:gray", label=f"(a) {TRACE_LABELS['a']}")
    ax_freq.set_ylabel("frequency noise\n[dB re 1 Hz$^2$/Hz]")
    ax_freq.grid(True, which="both", alpha=0.3)
    ax_freq.legend(fontsize=8, loc="upper right")

    for key, spectrum in traces.items():
        if key not in _RIN_TRACES:
            continue
        style = "--" if key in "dh" else "-"
        ax_rin.semilogx(
            f, spectrum.to_db().values, style, label=f"({key}) {TRACE_LABELS[key]}"
        )
    ax_rin.set_xlabel("Fourier frequency [Hz]")
    ax_rin.set_ylabel("RIN [dB/Hz]")
    ax_rin.grid(True, which="both", alpha=0.3)
    ax_rin.legend(fontsize=8, loc="upper right", ncol=1)

    fig.suptitle("Noise budget of the quantum-enhanced phase stabilization loop")
    fig.tight_layout()
    path = Path(out_path)
    FigureCanvasAgg(fig).print_figure(str(path), dpi=150)
    return path


def render_budget_figure(report: BudgetReport, out_path) -> Path:
    """Bar chart of the enhancement chain from generated squeezing to measured."""
    stages = report.stages
    labels = [
        "generated",
        "after loss\n+ phase jitter",
        "after noise\ncross-coupling",
        "measured\n(servo imperfection)",
    ]
    values = [
        report.ledger.initial_squeezing_db,
        stages.after_loss_and_phase_db,
        stages.after_coupling_db,
        stages.measured_db,
    ]

    fig = Figure(figsize=(6.5, 4.5))
    ax = fig.subplots()
    bars = ax.bar(labels, values, color=["#4878d0", "#6acc64", "#d65f5f", "#956cb4"])
    for bar, v in zip(bars, values):
        ax.annotate(
            f"{v:.2f} dB",
            (bar.get_x() + bar.get_width() / 2, v),
            ha="center",
            va="bottom",
            fontsize=9,
        )
    ax.set_ylabel("quantum enhancement [dB]")
    ax.set_title("Enhancement degradation chain")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    path = Path(out_path)
    FigureCanvasAgg(fig).print_figure(str(path), dpi=150)
    return path
