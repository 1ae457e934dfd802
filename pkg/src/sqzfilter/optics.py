"""Optical elements of the stabilization loop.

Covers the detuned readout cavity (noise-ellipse rotation plus excess
loss), the tap beam splitter with squeezed-vacuum injection on the open
port, and the degradation of a squeezed state by optical loss and
residual phase jitter.

Quadrature noise variances are dimensionless, normalized so that the
vacuum (shot-noise) level is exactly 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .spectra import linear_from_db

__all__ = [
    "CavityParams",
    "BeamSplitter",
    "QuadratureVariances",
    "SqueezerParams",
    "DETUNING_SLOPES",
    "rotation_angle",
    "detected_inloop_variance",
    "couple_at_bs",
    "apply_loss",
    "apply_phase_jitter",
    "detected_squeezing",
]

# Phase-to-amplitude conversion slope for the supported detuning regimes.
# Half detuning converts with the full omega/kappa coefficient; parking at
# three times the half-detuned point trades a 10x weaker conversion for much
# lower transmission loss of the injected squeezed field.
DETUNING_SLOPES = {"half_detuned": 1.0, "three_times_half_detuned": 0.1}


@dataclass(frozen=True)
class CavityParams:
    """Detuned cavity used as a phase-to-amplitude converter.

    kappa is the linewidth as an angular rate (rad/s).  Use
    ``from_linewidth_hz`` to construct from an ordinary FWHM in Hz; with
    that convention the rotation angle slope*omega/kappa reduces to
    slope*f/FWHM.  excess_loss records the transmission loss the cavity
    adds for an injected squeezed field; it enters the enhancement budget
    through the matching efficiency entry, not through the rotation ops.
    """

    kappa: float
    slope: float
    excess_loss: float = 0.0
    detuning: str = "custom"

    def __post_init__(self):
        if not (self.kappa > 0.0 and math.isfinite(self.kappa)):
            raise ValueError("cavity linewidth kappa must be positive")
        if not (0.0 < self.slope <= 1.0):
            raise ValueError("rotation slope must lie in (0, 1]")
        if not (0.0 <= self.excess_loss < 1.0):
            raise ValueError("excess loss must lie in [0, 1)")

    @classmethod
    def from_linewidth_hz(
        cls,
        fwhm_hz: float,
        detuning: str = "half_detuned",
        slope: Optional[float] = None,
        excess_loss: float = 0.0,
    ) -> "CavityParams":
        if detuning in DETUNING_SLOPES:
            if slope is not None:
                raise ValueError(f"slope is implied by detuning regime '{detuning}'")
            slope = DETUNING_SLOPES[detuning]
        elif detuning == "custom":
            if slope is None:
                raise ValueError("custom detuning requires an explicit slope")
        else:
            raise ValueError(f"unknown detuning regime '{detuning}'")
        return cls(2.0 * math.pi * fwhm_hz, slope, excess_loss, detuning)

    @property
    def linewidth_hz(self) -> float:
        return self.kappa / (2.0 * math.pi)


@dataclass(frozen=True)
class BeamSplitter:
    """Power-splitting tap: transmission t toward the in-loop sensor, reflectivity r.

    t + r must equal 1.  The degenerate edges t = 0 and t = 1 are accepted
    so that pure-reflection and pass-through limits can be evaluated;
    operations that divide by r reject r = 0 themselves.
    """

    t: float
    r: float

    def __post_init__(self):
        if not (0.0 <= self.t <= 1.0) or not (0.0 <= self.r <= 1.0):
            raise ValueError("beam splitter t and r must lie within [0, 1]")
        if abs(self.t + self.r - 1.0) > 1e-9:
            raise ValueError("beam splitter must satisfy t + r = 1")

    @classmethod
    def from_reflectivity(cls, r: float) -> "BeamSplitter":
        return cls(1.0 - r, r)


@dataclass(frozen=True)
class QuadratureVariances:
    """Symmetric-ordering noise variances (S_X, S_Y) of a field; vacuum = (1, 1)."""

    s_x: float
    s_y: float

    def __post_init__(self):
        if not (self.s_x > 0.0 and math.isfinite(self.s_x)):
            raise ValueError("s_x must be positive")
        if not (self.s_y > 0.0 and math.isfinite(self.s_y)):
            raise ValueError("s_y must be positive")


VACUUM = QuadratureVariances(1.0, 1.0)


@dataclass(frozen=True)
class SqueezerParams:
    """Squeezed-vacuum source with its cascaded efficiencies and phase jitters.

    squeezing_db is the generated squeezing below shot noise (positive
    number), antisqueezing_db the excess above shot noise.  Efficiencies
    are power transmission fractions applied as one cascaded loss; phase
    jitters are RMS milliradians combined into a single Gaussian jitter.
    """

    squeezing_db: float
    antisqueezing_db: float = 17.0
    efficiencies: Mapping[str, float] = field(default_factory=dict)
    phase_jitters_mrad: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.squeezing_db < 0.0:
            raise ValueError("squeezing_db must be >= 0")
        if self.antisqueezing_db < self.squeezing_db:
            # V_s * V_a >= 1 in linear units is equivalent to a0 >= s0
            raise ValueError("antisqueezing_db must be >= squeezing_db")
        for name, eta in self.efficiencies.items():
            if not (0.0 < eta <= 1.0):
                raise ValueError(f"efficiency '{name}' must lie in (0, 1]")
        for name, jit in self.phase_jitters_mrad.items():
            if jit < 0.0:
                raise ValueError(f"phase jitter '{name}' must be >= 0")

    @property
    def total_efficiency(self) -> float:
        eta = 1.0
        for v in self.efficiencies.values():
            eta *= v
        return eta

    def combined_jitter_rad(self, mode: str = "linear_sum") -> float:
        """Single RMS jitter in radians from the named contributions.

        Modes match the budget module: 'linear_sum' adds the RMS values
        directly, 'quadrature_sum' adds them in quadrature.
        """
        vals = list(self.phase_jitters_mrad.values())
        if mode == "linear_sum":
            total = sum(vals)
        elif mode == "quadrature_sum":
            total = math.sqrt(sum(v * v for v in vals))
        else:
            raise ValueError(f"unknown jitter combination mode '{mode}'")
        return total * 1e-3


def rotation_angle(cavity: CavityParams, f):
    """Noise-ellipse rotation angle theta = slope * (2*pi*f) / kappa.

    Linearized small-angle model; no wrapping is applied, so callers are
    expected to stay in the regime theta << 1.
    """
    farr = np.asarray(f, dtype=float)
    if np.any(farr < 0.0):
        raise ValueError("rotation_angle requires f >= 0")
    out = cavity.slope * (2.0 * np.pi * farr) / cavity.kappa
    return float(out) if farr.ndim == 0 else out


def detected_inloop_variance(
    inp: QuadratureVariances,
    squeezed: QuadratureVariances,
    bs: BeamSplitter,
    theta: float,
) -> float:
    """Variance seen by the in-loop detector behind the rotating cavity.

    t*S_in^X*cos^2(theta) + t*S_in^Y*sin^2(theta) + r*S_S^X.  The squeezed
    quadrature enters with coefficient exactly r and no theta dependence
    because its injection phase is servoed to -theta, which cancels the
    anti-squeezed component.
    """
    if not abs(theta) < math.pi / 2.0:
        raise ValueError("rotation angle must satisfy |theta| < pi/2")
    s2 = math.sin(theta) ** 2
    # Written as t*(Sx + (Sy - Sx)*sin^2) so equal input quadratures give a
    # result exactly independent of theta.
    return bs.t * (inp.s_x + (inp.s_y - inp.s_x) * s2) + bs.r * squeezed.s_x


def couple_at_bs(
    inp: QuadratureVariances,
    squeezed: QuadratureVariances,
    bs: BeamSplitter,
    lock_angle: float,
) -> QuadratureVariances:
    """Variances of the combined field behind the tap beam splitter.

    The squeezed ellipse arrives rotated by lock_angle relative to the
    input quadratures, so its two variances mix by cos^2/sin^2 before the
    power split.
    """
    if not abs(lock_angle) < math.pi / 2.0:
        raise ValueError("lock angle must satisfy |theta| < pi/2")
    s2 = math.sin(lock_angle) ** 2
    x = bs.t * inp.s_x + bs.r * (squeezed.s_x + (squeezed.s_y - squeezed.s_x) * s2)
    y = bs.t * inp.s_y + bs.r * (squeezed.s_y + (squeezed.s_x - squeezed.s_y) * s2)
    return QuadratureVariances(x, y)


def apply_loss(v: QuadratureVariances, eta: float) -> QuadratureVariances:
    """Mix a fraction (1 - eta) of vacuum into both quadratures.

    eta is the power transmission in (0, 1]; vacuum maps to vacuum.
    """
    if not (0.0 < eta <= 1.0):
        raise ValueError("transmission eta must lie in (0, 1]")
    return QuadratureVariances(
        eta * v.s_x + (1.0 - eta),
        eta * v.s_y + (1.0 - eta),
    )


def apply_phase_jitter(v: QuadratureVariances, sigma_rad: float) -> QuadratureVariances:
    """Average the noise ellipse over a Gaussian rotation of RMS sigma_rad.

    With c = E[cos^2 theta] = (1 + exp(-2 sigma^2)) / 2 the variances mix as
    V' = c V + (1 - c) V_orthogonal, contracting toward isotropy.
    """
    if sigma_rad < 0.0:
        raise ValueError("jitter RMS must be >= 0")
    c = 0.5 * (1.0 + math.exp(-2.0 * sigma_rad * sigma_rad))
    return QuadratureVariances(
        c * v.s_x + (1.0 - c) * v.s_y,
        c * v.s_y + (1.0 - c) * v.s_x,
    )


def detected_squeezing(params: SqueezerParams, jitter_mode: str = "linear_sum") -> QuadratureVariances:
    """Squeezed-state variances at the detector after loss and phase jitter.

    Sequential composition: dB levels to linear variances, one cascaded
    loss with the product of the efficiencies, then the combined Gaussian
    phase jitter.
    """
    v = QuadratureVariances(
        linear_from_db(-params.squeezing_db),
        linear_from_db(params.antisqueezing_db),
    )
    v = apply_loss(v, params.total_efficiency)
    return apply_phase_jitter(v, params.combined_jitter_rad(jitter_mode))
