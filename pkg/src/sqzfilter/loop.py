"""Shot-noise scaling, servo transfer function, and loop noise spectra.

Implements the relative-intensity-noise (RIN) balance of the stabilization
loop: the in-loop detector spectrum, the open- and closed-loop spectra seen
by the independent witness cavity, the phase-noise to frequency-noise
conversion, and the normalization between the two cavity readouts.

All RIN densities are linear (1/Hz) unless stated otherwise.  Every
function here is pure and accepts either a scalar frequency or an array;
evaluation is pointwise, so results are independent of ordering.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import constants

from .errors import LoopInstabilityWarning, SingularityError
from .optics import BeamSplitter, CavityParams, rotation_angle
from .spectra import Spectrum, Unit

__all__ = [
    "DetectionParams",
    "ServoModel",
    "NoiseFloors",
    "shot_noise_rsn2",
    "servo_gain",
    "suppression_factor",
    "inloop_rin2",
    "outofloop_rin2_open",
    "outofloop_rin2_closed",
    "freq_noise_from_phase",
    "phase_noise_from_freq",
    "cross_cavity_normalization",
]

# |1 - sqrt(t) G| below this raises SingularityError instead of emitting
# near-infinite densities into exported spectra.
SINGULARITY_THRESHOLD = 1e-6


@dataclass(frozen=True)
class DetectionParams:
    """Detected optical power (W) and wavelength (m) of the in-loop sensor."""

    power_w: float
    wavelength_m: float

    def __post_init__(self):
        if not (self.power_w > 0.0 and math.isfinite(self.power_w)):
            raise ValueError("detected power must be positive")
        if not (self.wavelength_m > 0.0 and math.isfinite(self.wavelength_m)):
            raise ValueError("wavelength must be positive")


def shot_noise_rsn2(det: DetectionParams) -> float:
    """Shot-noise-equivalent RIN density 2*h*nu/P in 1/Hz (nu = c/lambda)."""
    nu = constants.c / det.wavelength_m
    return 2.0 * constants.h * nu / det.power_w


@dataclass(frozen=True)
class ServoModel:
    """Feedback controller: n-th order integrator with optional delay and low-pass.

    |G| crosses unity at unity_gain_hz when there is no delay or low-pass.
    """

    unity_gain_hz: float
    integrator_slope: int = 1
    delay_s: float = 0.0
    low_pass_hz: Optional[float] = None

    def __post_init__(self):
        if not (self.unity_gain_hz > 0.0 and math.isfinite(self.unity_gain_hz)):
            raise ValueError("unity gain frequency must be positive")
        if int(self.integrator_slope) != self.integrator_slope or self.integrator_slope < 1:
            raise ValueError("integrator slope must be an integer >= 1")
        if self.delay_s < 0.0:
            raise ValueError("delay must be >= 0")
        if self.low_pass_hz is not None and self.low_pass_hz <= 0.0:
            raise ValueError("low-pass corner must be positive")


def servo_gain(servo: ServoModel, f):
    """Complex loop gain G(f) = (f_ug / (i f))^n * exp(-i 2 pi f tau) [* low-pass]."""
    farr = np.asarray(f, dtype=float)
    if np.any(farr <= 0.0):
        raise ValueError("servo gain is defined for f > 0")
    g = (servo.unity_gain_hz / (1j * farr)) ** servo.integrator_slope
    if servo.delay_s:
        g = g * np.exp(-1j * 2.0 * np.pi * farr * servo.delay_s)
    if servo.low_pass_hz is not None:
        g = g / (1.0 + 1j * farr / servo.low_pass_hz)
    return complex(g) if farr.ndim == 0 else g


def suppression_factor(servo: ServoModel, bs: BeamSplitter, f):
    """|1 - sqrt(t) G(f)|^2, the closed-loop suppression of the sensed noise.

    Stable negative feedback keeps this above 1 in the suppression band.
    Values below 1 are reported with a LoopInstabilityWarning; values close
    enough to zero to blow up the spectra raise SingularityError naming the
    first offending frequency.
    """
    farr = np.asarray(f, dtype=float)
    mod = np.abs(1.0 - math.sqrt(bs.t) * servo_gain(servo, farr))
    mod = np.atleast_1d(mod)
    flat_f = np.atleast_1d(farr)
    if np.any(mod < SINGULARITY_THRESHOLD):
        idx = int(np.argmax(mod < SINGULARITY_THRESHOLD))
        raise SingularityError(flat_f[min(idx, flat_f.size - 1)])
    unstable = mod < 1.0
    if np.any(unstable):
        worst = float(np.min(mod))
        warnings.warn(
            f"loop amplifies at {int(np.count_nonzero(unstable))} frequency point(s), "
            f"min |1 - sqrt(t)G| = {worst:.3g}",
            LoopInstabilityWarning,
            stacklevel=2,
        )
    out = mod * mod
    return float(out[0]) if farr.ndim == 0 else out.reshape(farr.shape)


@dataclass(frozen=True, eq=False)
class NoiseFloors:
    """Technical noise floors entering the loop budget.

    residual_amplitude: amplitude-quadrature RIN density (trace f role).
    electronic: detector electronic noise as an equivalent RIN density
        (trace g role); it does not enter the loop equations, only the
        trace family and the coupling budget.
    free_running_phase: free-running phase noise density in rad^2/Hz
        (trace a source).  Because the RIN of the phase quadrature is
        numerically the phase noise density in shot-noise-relative units,
        these values are used directly as the phase-quadrature RIN.
    """

    residual_amplitude: Spectrum
    electronic: Spectrum
    free_running_phase: Spectrum

    def __post_init__(self):
        if self.residual_amplitude.unit is not Unit.RIN:
            raise ValueError("residual_amplitude floor must carry the linear RIN unit")
        if self.electronic.unit is not Unit.RIN:
            raise ValueError("electronic floor must carry the linear RIN unit")
        if self.free_running_phase.unit is not Unit.PHASE_NOISE:
            raise ValueError("free_running_phase floor must carry the rad^2/Hz unit")
        if not (
            self.residual_amplitude.grid.matches(self.electronic.grid)
            and self.residual_amplitude.grid.matches(self.free_running_phase.grid)
        ):
            raise ValueError("noise floors must share one frequency grid")

    @property
    def grid(self):
        return self.residual_amplitude.grid

    def rin_x2(self, f):
        return self.residual_amplitude.sample(f)

    def rin_y2(self, f):
        return self.free_running_phase.sample(f)


def inloop_rin2(
    floors: NoiseFloors,
    cavity1: CavityParams,
    det: DetectionParams,
    squeezed_x: float,
    f,
):
    """In-loop detector RIN density.

    Amplitude floor, plus the phase floor converted with the squared
    rotation angle (slope*omega/kappa_1)^2, plus the shot-noise density
    scaled by the injected squeezed variance.
    """
    if not squeezed_x > 0.0:
        raise ValueError("squeezed variance must be positive")
    theta = rotation_angle(cavity1, f)
    return floors.rin_x2(f) + theta * theta * floors.rin_y2(f) + shot_noise_rsn2(det) * squeezed_x


def outofloop_rin2_open(floors: NoiseFloors, cavity2: CavityParams, f):
    """Witness-cavity RIN density with the loop open: amplitude floor plus
    the phase floor converted with cavity2's rotation coefficient."""
    theta = rotation_angle(cavity2, f)
    return floors.rin_x2(f) + theta * theta * floors.rin_y2(f)


def outofloop_rin2_closed(
    floors: NoiseFloors,
    cavity2: CavityParams,
    servo: ServoModel,
    bs: BeamSplitter,
    det: DetectionParams,
    squeezed_x: float,
    f,
):
    """Witness-cavity RIN density with the loop closed.

    The phase floor is divided by |1 - sqrt(t) G|^2 and the in-loop
    detection floor RSN^2 * S_S^X / r is written back onto the phase
    quadrature; both convert with cavity2's rotation coefficient.
    """
    if not squeezed_x > 0.0:
        raise ValueError("squeezed variance must be positive")
    if bs.r <= 0.0:
        raise ValueError("closed-loop readout term requires r > 0")
    theta = rotation_angle(cavity2, f)
    supp = suppression_factor(servo, bs, f)
    readout = shot_noise_rsn2(det) * squeezed_x / bs.r
    return floors.rin_x2(f) + theta * theta * (floors.rin_y2(f) / supp + readout)


def freq_noise_from_phase(s_phi: Spectrum) -> Spectrum:
    """S_nu(f) = f^2 * S_phi(f); rad^2/Hz becomes Hz^2/Hz."""
    if s_phi.unit is not Unit.PHASE_NOISE:
        raise ValueError("input must be a phase-noise spectrum in rad^2/Hz")
    return Spectrum(s_phi.grid, s_phi.values * s_phi.grid.points**2, Unit.FREQ_NOISE)


def phase_noise_from_freq(s_nu: Spectrum) -> Spectrum:
    """Inverse of freq_noise_from_phase: S_phi(f) = S_nu(f) / f^2."""
    if s_nu.unit is not Unit.FREQ_NOISE:
        raise ValueError("input must be a frequency-noise spectrum in Hz^2/Hz")
    return Spectrum(s_nu.grid, s_nu.values / s_nu.grid.points**2, Unit.PHASE_NOISE)


def cross_cavity_normalization(cavity_in: CavityParams, cavity_out: CavityParams) -> float:
    """Factor mapping a witness-readout RIN onto the in-loop readout scale.

    Ratio of the squared phase-to-amplitude conversion coefficients,
    (slope_in/kappa_in)^2 / (slope_out/kappa_out)^2; equal to 1 when both
    readouts convert identically.
    """
    return ((cavity_in.slope / cavity_in.kappa) / (cavity_out.slope / cavity_out.kappa)) ** 2
