"""Shared domain types: grids, envelopes, memory parameters, control specs.

All quantities are expressed in normalized units: times in 1/gamma, rates in
gamma, where gamma is the polarization decay rate of the optical transition.
Dimensional quantities never enter this layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

TWO_LN2 = 2.0 * math.log(2.0)


@dataclass(frozen=True)
class AxisGrid:
    """Uniform 1-D sampling grid (time, space, frequency, or detuning axis)."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ValueError(f"grid step must be positive and finite, got {self.step}")
        if self.count < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.count}")
        if not math.isfinite(self.start):
            raise ValueError("grid start must be finite")

    @property
    def end(self) -> float:
        return self.start + self.step * (self.count - 1)

    @property
    def span(self) -> float:
        return self.step * (self.count - 1)

    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    def trapezoid_weights(self) -> np.ndarray:
        w = np.full(self.count, self.step)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    @classmethod
    def from_bounds(cls, start: float, end: float, count: int) -> "AxisGrid":
        if count < 2:
            raise ValueError(f"grid needs at least 2 points, got {count}")
        return cls(start=start, step=(end - start) / (count - 1), count=count)


@dataclass(frozen=True)
class ComplexEnvelope:
    """Sampled complex field amplitude on a uniform grid.

    Houses signal, polarization, and spin-wave slices as well as their
    Fourier transforms; carries no normalization of its own.
    """

    grid: AxisGrid
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=complex)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1 or len(samples) != self.grid.count:
            raise ValueError(
                f"envelope needs {self.grid.count} samples, got shape {samples.shape}"
            )
        if not np.all(np.isfinite(samples.real)) or not np.all(np.isfinite(samples.imag)):
            raise ValueError("envelope samples must be finite")


@dataclass(frozen=True)
class MemoryParams:
    """Normalized memory parameters: optical depth d, two-photon detuning
    delta (units of gamma), and storage-state decay gamma_b (units of gamma).

    The complex detuning gamma_bar = 1 - i*delta is always derived, never
    stored; its real part is the polarization decay rate in these units.
    """

    d: float
    delta: float = 0.0
    gamma_b: float = 0.0

    def __post_init__(self):
        if self.d < 0:
            raise ValueError(f"optical depth must be >= 0, got {self.d}")
        if self.gamma_b < 0:
            raise ValueError(f"storage-state decay must be >= 0, got {self.gamma_b}")

    @property
    def gamma_bar(self) -> complex:
        return 1.0 - 1j * self.delta


@dataclass(frozen=True)
class GaussianControlSpec:
    """Gaussian control field Omega(tau) = Omega0 exp(-[(tau-delay)/2 sigma]^2)
    with sigma = duration_fwhm/(2 sqrt(2 ln 2)) and Omega0 chosen so the pulse
    area integrates to `area`."""

    area: float
    delay: float
    duration_fwhm: float

    def __post_init__(self):
        if self.area < 0:
            raise ValueError(f"pulse area must be >= 0, got {self.area}")
        if self.duration_fwhm <= 0:
            raise ValueError(f"control duration must be > 0, got {self.duration_fwhm}")

    @property
    def sigma(self) -> float:
        return self.duration_fwhm / (2.0 * math.sqrt(TWO_LN2))

    @property
    def peak_rabi(self) -> float:
        return self.area / (2.0 * math.sqrt(math.pi) * self.sigma)

    def envelope(self, tau: np.ndarray) -> np.ndarray:
        arg = (np.asarray(tau, dtype=float) - self.delay) / (2.0 * self.sigma)
        return self.peak_rabi * np.exp(-(arg**2)) + 0j


@dataclass(frozen=True)
class SplineControlSpec:
    """Free-form control field interpolated through knots; identically zero
    outside [first knot, last knot]."""

    knot_times: np.ndarray
    knot_values: np.ndarray
    interpolation: str = "cubic"

    def __post_init__(self):
        times = np.asarray(self.knot_times, dtype=float)
        values = np.asarray(self.knot_values, dtype=complex)
        object.__setattr__(self, "knot_times", times)
        object.__setattr__(self, "knot_values", values)
        if times.ndim != 1 or len(times) < 2:
            raise ValueError("need at least 2 knots")
        if len(values) != len(times):
            raise ValueError("knot_times and knot_values lengths differ")
        if not np.all(np.diff(times) > 0):
            raise ValueError("knot_times must be strictly increasing")
        if self.interpolation not in ("cubic", "linear"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")

    def envelope(self, tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.interpolation == "linear":
            out = np.interp(tau, self.knot_times, self.knot_values.real) + 1j * np.interp(
                tau, self.knot_times, self.knot_values.imag
            )
        else:
            spline = CubicSpline(self.knot_times, self.knot_values)
            out = spline(tau)
        inside = (tau >= self.knot_times[0]) & (tau <= self.knot_times[-1])
        return np.where(inside, out, 0.0 + 0j)


def evaluate_control(control, tau: np.ndarray) -> np.ndarray:
    """Rabi-frequency envelope of a control spec on a time axis; zero if None."""
    if control is None:
        return np.zeros(len(tau), dtype=complex)
    return control.envelope(np.asarray(tau, dtype=float))


@dataclass(frozen=True)
class InhomogeneousProfile:
    """Normalized atomic detuning distribution p_Delta on a uniform grid:
    trapezoid integral of the weights equals 1."""

    detuning_grid: AxisGrid
    weights: np.ndarray

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", weights)
        if len(weights) != self.detuning_grid.count:
            raise ValueError("weights length must match the detuning grid")
        if np.any(weights < 0):
            raise ValueError("profile weights must be >= 0")
        total = float(np.sum(self.detuning_grid.trapezoid_weights() * weights))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"profile must integrate to 1, got {total!r}")

    @classmethod
    def from_unnormalized(cls, detuning_grid: AxisGrid, weights) -> "InhomogeneousProfile":
        weights = np.asarray(weights, dtype=float)
        total = float(np.sum(detuning_grid.trapezoid_weights() * weights))
        if total <= 0:
            raise ValueError("profile weights must have positive total")
        return cls(detuning_grid, weights / total)

    def resampled(self, count: int) -> "InhomogeneousProfile":
        """Linear resampling onto a finer grid over the same support; the
        trapezoid normalization is preserved without rescaling."""
        grid = AxisGrid.from_bounds(self.detuning_grid.start, self.detuning_grid.end, count)
        new_weights = np.interp(grid.points(), self.detuning_grid.points(), self.weights)
        return InhomogeneousProfile(grid, new_weights)


@dataclass(frozen=True)
class EnergyBudget:
    """Continuity accounting for one run.  `input` is the total initial
    energy (input-field norm plus any initial spin-wave norm) and satisfies
    input = transmitted + stored_p + stored_b + decayed_p + decayed_b
    up to the integrator's discretization error."""

    input: float
    transmitted: float
    stored_p: float
    stored_b: float
    decayed_p: float
    decayed_b: float

    @property
    def residual(self) -> float:
        total = (
            self.transmitted + self.stored_p + self.stored_b + self.decayed_p + self.decayed_b
        )
        scale = self.input if self.input > 0 else 1.0
        return abs(self.input - total) / scale


@dataclass(frozen=True)
class SimulationResult:
    """Output field at z=1 versus tau, final polarization and spin wave
    versus z, and the energy budget of the run."""

    a_out: ComplexEnvelope
    p_final: ComplexEnvelope
    b_final: ComplexEnvelope
    energy: EnergyBudget


def make_gaussian_signal(duration_fwhm: float, grid: AxisGrid) -> ComplexEnvelope:
    """Unit-L2-norm Gaussian input field A_in(tau) = exp(-tau^2/4 sigma^2)
    centered at tau=0, sigma = duration_fwhm/(2 sqrt(2 ln 2))."""
    if duration_fwhm <= 0:
        raise ValueError(f"duration must be > 0, got {duration_fwhm}")
    sigma = duration_fwhm / (2.0 * math.sqrt(TWO_LN2))
    if grid.start > -4.0 * sigma or grid.end < 4.0 * sigma:
        raise ValueError(
            f"grid [{grid.start}, {grid.end}] too short for +-4 sigma = {4 * sigma:.4g}"
        )
    tau = grid.points()
    samples = np.exp(-(tau**2) / (4.0 * sigma**2)).astype(complex)
    norm = np.sqrt(np.sum(grid.trapezoid_weights() * np.abs(samples) ** 2))
    return ComplexEnvelope(grid, samples / norm)


def bandwidth_from_duration(duration_fwhm: float) -> float:
    """Fourier-limited intensity bandwidth BW = 2 ln2 / (pi * duration_fwhm)."""
    if duration_fwhm <= 0:
        raise ValueError(f"duration must be > 0, got {duration_fwhm}")
    return TWO_LN2 / (math.pi * duration_fwhm)


def envelope_l2(env: ComplexEnvelope) -> float:
    """Trapezoidal integral of |samples|^2 over the grid."""
    return float(np.sum(env.grid.trapezoid_weights() * np.abs(env.samples) ** 2))
