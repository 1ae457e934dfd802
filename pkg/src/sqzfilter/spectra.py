"""Frequency grids, tagged noise spectra, and decibel arithmetic.

All spectral quantities are one-sided power densities (per Hz).  Decibels
are power decibels (factor 10) throughout, never amplitude decibels.
Spectra are immutable values: every operation returns a new object, so
they are safe to share between threads and to cache for golden-file
comparisons.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Unit",
    "FrequencyGrid",
    "Spectrum",
    "db_from_linear",
    "linear_from_db",
    "uncorrelated_sum",
    "log_spaced_grid",
]


def db_from_linear(x):
    """10*log10(x) for a positive linear power quantity (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("db_from_linear requires finite input")
    if np.any(arr <= 0.0):
        raise ValueError("db_from_linear requires positive input")
    out = 10.0 * np.log10(arr)
    return float(out) if arr.ndim == 0 else out


def linear_from_db(d):
    """Inverse of db_from_linear: 10**(d/10)."""
    arr = np.asarray(d, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("linear_from_db requires finite input")
    out = np.power(10.0, arr / 10.0)
    return float(out) if arr.ndim == 0 else out


class Unit(enum.Enum):
    """Spectral density unit tags.

    Conversions between tags are explicit operations on Spectrum; nothing
    converts implicitly.
    """

    RIN = "rin_1_per_hz"                        # relative intensity noise power, 1/Hz
    RIN_DB = "rin_db_per_hz"                    # dB/Hz
    FREQ_NOISE = "freq_noise_hz2_per_hz"        # Hz^2/Hz
    FREQ_NOISE_DB = "freq_noise_db_re_hz2_per_hz"
    PHASE_NOISE = "phase_noise_rad2_per_hz"     # rad^2/Hz

    @property
    def is_db(self) -> bool:
        return self in (Unit.RIN_DB, Unit.FREQ_NOISE_DB)

    @property
    def is_linear(self) -> bool:
        return not self.is_db


_DB_OF = {Unit.RIN: Unit.RIN_DB, Unit.FREQ_NOISE: Unit.FREQ_NOISE_DB}
_LINEAR_OF = {v: k for k, v in _DB_OF.items()}


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Strictly increasing Fourier frequencies in Hz, all positive and finite."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, dtype=float))
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("frequency grid must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(pts)) or pts[0] <= 0.0:
            raise ValueError("frequencies must be finite and positive")
        if np.any(np.diff(pts) <= 0.0):
            raise ValueError("frequencies must be strictly increasing")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return int(self.points.size)

    @property
    def f_min(self) -> float:
        return float(self.points[0])

    @property
    def f_max(self) -> float:
        return float(self.points[-1])

    @property
    def omega(self) -> np.ndarray:
        """Angular frequencies 2*pi*f."""
        return 2.0 * np.pi * self.points

    def matches(self, other: "FrequencyGrid") -> bool:
        return np.array_equal(self.points, other.points)


def log_spaced_grid(f_min: float, f_max: float, n: int) -> FrequencyGrid:
    """n logarithmically spaced frequencies including both endpoints."""
    if not (0.0 < f_min < f_max) or not np.isfinite(f_min) or not np.isfinite(f_max):
        raise ValueError("require 0 < f_min < f_max, both finite")
    if n < 2:
        raise ValueError("require n >= 2 grid points")
    return FrequencyGrid(np.geomspace(f_min, f_max, int(n)))


@dataclass(frozen=True, eq=False)
class Spectrum:
    """A power spectral density on a FrequencyGrid with a mandatory unit tag."""

    grid: FrequencyGrid
    values: np.ndarray
    unit: Unit

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.points.shape:
            raise ValueError(
                f"values length {vals.size} does not match grid length {len(self.grid)}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("spectrum values must be finite")
        if self.unit.is_linear and np.any(vals < 0.0):
            raise ValueError(f"negative density not allowed for linear unit {self.unit.name}")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def to_db(self) -> "Spectrum":
        """Explicit linear -> dB conversion; the grid object is shared, not copied."""
        if self.unit.is_db:
            return self
        if self.unit not in _DB_OF:
            raise ValueError(f"no dB counterpart defined for unit {self.unit.name}")
        return Spectrum(self.grid, db_from_linear(self.values), _DB_OF[self.unit])

    def to_linear(self) -> "Spectrum":
        """Explicit dB -> linear conversion; the grid object is shared, not copied."""
        if self.unit.is_linear:
            return self
        return Spectrum(self.grid, linear_from_db(self.values), _LINEAR_OF[self.unit])

    def sample(self, f):
        """Density at frequency f inside the grid span.

        Grid points are returned exactly; between points the density is
        interpolated linearly on a logarithmic frequency axis.
        """
        farr = np.asarray(f, dtype=float)
        if np.any(farr < self.grid.f_min) or np.any(farr > self.grid.f_max):
            raise ValueError(
                f"frequency outside grid span [{self.grid.f_min:g}, {self.grid.f_max:g}] Hz"
            )
        out = np.interp(np.log(farr), np.log(self.grid.points), self.values)
        return float(out) if farr.ndim == 0 else out


def uncorrelated_sum(spectra) -> Spectrum:
    """Pointwise sum of linear power densities from independent sources.

    All spectra must share one grid and one linear unit.
    """
    spectra = list(spectra)
    if not spectra:
        raise ValueError("uncorrelated_sum needs at least one spectrum")
    first = spectra[0]
    if first.unit.is_db:
        raise ValueError("uncorrelated_sum operates on linear-unit spectra")
    total = np.array(first.values)
    for s in spectra[1:]:
        if s.unit is not first.unit:
            raise ValueError(f"unit mismatch: {s.unit.name} vs {first.unit.name}")
        if not s.grid.matches(first.grid):
            raise ValueError("grid mismatch between spectra")
        total = total + s.values
    return Spectrum(first.grid, total, first.unit)
