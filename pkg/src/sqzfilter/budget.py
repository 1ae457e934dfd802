"""Degradation-ledger arithmetic for the quantum-enhancement budget.

Cascades the optical efficiencies, combines the phase-jitter
contributions, totals the cross-coupling fractions, and walks the staged
enhancement chain from generated squeezing down to the measured value.
This module implements the additive-dB bookkeeping of the budget table;
the physical variance model lives in the optics module and the two are
reported side by side rather than reconciled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Tuple

__all__ = [
    "BudgetEntry",
    "EnhancementLedger",
    "LedgerStages",
    "total_efficiency",
    "total_phase_fluctuation",
    "coupling_fraction_total",
    "enhancement_after_coupling",
    "ledger_chain",
]

ENTRY_KINDS = ("efficiency", "phase_mrad", "coupling_percent")


@dataclass(frozen=True)
class BudgetEntry:
    """One named contribution with its uncertainty, tagged by unit kind."""

    name: str
    kind: str
    value: float
    uncertainty: float = 0.0

    def __post_init__(self):
        if self.kind not in ENTRY_KINDS:
            raise ValueError(f"unknown budget entry kind '{self.kind}'")
        if self.uncertainty < 0.0:
            raise ValueError("uncertainty must be >= 0")
        if self.kind == "efficiency" and not (0.0 < self.value <= 1.0):
            raise ValueError(f"efficiency '{self.name}' must lie in (0, 1]")
        if self.kind in ("phase_mrad", "coupling_percent") and self.value < 0.0:
            raise ValueError(f"{self.kind} entry '{self.name}' must be >= 0")


def _check_kind(entries, kind: str):
    for e in entries:
        if e.kind != kind:
            raise ValueError(f"expected {kind} entry, got '{e.kind}' for '{e.name}'")


def total_efficiency(entries: Iterable[BudgetEntry]) -> Tuple[float, float]:
    """Product of the efficiencies; relative uncertainties add in quadrature.

    Returns (total, uncertainty).  An empty list gives (1.0, 0.0).
    """
    entries = list(entries)
    _check_kind(entries, "efficiency")
    total = 1.0
    rel_sq = 0.0
    for e in entries:
        total *= e.value
        rel_sq += (e.uncertainty / e.value) ** 2
    return total, total * math.sqrt(rel_sq)


def total_phase_fluctuation(
    entries: Iterable[BudgetEntry], mode: str = "linear_sum"
) -> Tuple[float, float]:
    """Combined RMS phase fluctuation in mrad.

    'linear_sum' adds the values directly (the conventional budget-table
    total); 'quadrature_sum' adds them in quadrature, which is how
    independent jitters combine physically.  Returns (total, uncertainty).
    """
    entries = list(entries)
    _check_kind(entries, "phase_mrad")
    if mode == "linear_sum":
        total = sum(e.value for e in entries)
        unc = math.sqrt(sum(e.uncertainty**2 for e in entries))
    elif mode == "quadrature_sum":
        total = math.sqrt(sum(e.value**2 for e in entries))
        unc = (
            math.sqrt(sum((e.value * e.uncertainty) ** 2 for e in entries)) / total
            if total > 0.0
            else 0.0
        )
    else:
        raise ValueError(f"unknown combination mode '{mode}'")
    return total, unc


def coupling_fraction_total(entries: Iterable[BudgetEntry]) -> Tuple[float, float]:
    """Summed cross-coupling as a fraction of the in-loop shot-noise level.

    Entries carry percentages; returns (fraction, uncertainty).
    """
    entries = list(entries)
    _check_kind(entries, "coupling_percent")
    total = sum(e.value for e in entries) / 100.0
    unc = math.sqrt(sum(e.uncertainty**2 for e in entries)) / 100.0
    return total, unc


def enhancement_after_coupling(e_db: float, coupling: float) -> float:
    """Enhancement left after adding an uncorrelated coupling floor.

    -10*log10(10^(-e_db/10) + coupling).  Never exceeds e_db nor the
    ceiling -10*log10(coupling) set by the coupling alone.
    """
    if coupling < 0.0:
        raise ValueError("coupling fraction must be >= 0")
    return -10.0 * math.log10(10.0 ** (-e_db / 10.0) + coupling)


@dataclass(frozen=True)
class EnhancementLedger:
    """Inputs to the staged enhancement chain, all in dB except the coupling fraction."""

    initial_squeezing_db: float
    loss_degradation_db: float
    phase_degradation_db: float
    coupling_fraction: float
    servo_imperfection_db: float

    def __post_init__(self):
        if self.loss_degradation_db < 0.0 or self.phase_degradation_db < 0.0:
            raise ValueError("degradations must be >= 0")
        if self.coupling_fraction < 0.0:
            raise ValueError("coupling fraction must be >= 0")
        if self.servo_imperfection_db < 0.0:
            raise ValueError("servo imperfection must be >= 0")


@dataclass(frozen=True)
class LedgerStages:
    """Enhancement in dB after each degradation stage, with flooring flags."""

    after_loss_and_phase_db: float
    after_coupling_db: float
    measured_db: float
    flags: Tuple[str, ...]


def ledger_chain(ledger: EnhancementLedger) -> LedgerStages:
    """Walk the chain: subtract loss and phase in dB, fold in the coupling
    floor, subtract the servo imperfection.

    Stages that would go negative are floored at 0 dB and flagged.
    """
    flags = []
    stage1 = (
        ledger.initial_squeezing_db
        - ledger.loss_degradation_db
        - ledger.phase_degradation_db
    )
    if stage1 < 0.0 or (stage1 == 0.0 and ledger.initial_squeezing_db > 0.0):
        flags.append("loss and phase degradations consume the initial squeezing; stage floored at 0 dB")
        stage1 = max(stage1, 0.0)

    stage2 = enhancement_after_coupling(stage1, ledger.coupling_fraction)
    if stage2 < 0.0:
        flags.append("cross-coupling exceeds the remaining enhancement; stage floored at 0 dB")
        stage2 = 0.0

    stage3 = stage2 - ledger.servo_imperfection_db
    if stage3 < 0.0:
        flags.append("servo imperfection exceeds the remaining enhancement; stage floored at 0 dB")
        stage3 = 0.0

    return LedgerStages(stage1, stage2, stage3, tuple(flags))
