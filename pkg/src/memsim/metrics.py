"""Figures of merit: efficiencies, waveform fidelity, time-bandwidth
product, noise metrics, and lifetime fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import curve_fit

from .core import ComplexEnvelope

TWO_LN2 = 2.0 * math.log(2.0)


@dataclass(frozen=True)
class NoiseFigures:
    snr: float
    tnr: float
    single_photon_fidelity: float
    mu1: float
    mean_noise_photons: float


@dataclass(frozen=True)
class StageEfficiencies:
    storage: float
    retrieval: float
    total: float


def total_efficiency(a_in: ComplexEnvelope, a_out: ComplexEnvelope) -> float:
    """Integrated intensity ratio of the retrieved field to the input."""
    win = a_in.grid.trapezoid_weights()
    wout = a_out.grid.trapezoid_weights()
    denom = float(np.sum(win * np.abs(a_in.samples) ** 2))
    if denom <= 0:
        raise ValueError("zero input envelope")
    return float(np.sum(wout * np.abs(a_out.samples) ** 2)) / denom


def stage_efficiencies(
    a_in: ComplexEnvelope, b_stored: ComplexEnvelope, a_out: ComplexEnvelope
) -> StageEfficiencies:
    """Storage efficiency (stored spin-wave norm over input norm), retrieval
    efficiency (output norm over stored norm), and their product."""
    win = a_in.grid.trapezoid_weights()
    wz = b_stored.grid.trapezoid_weights()
    wout = a_out.grid.trapezoid_weights()
    input_norm = float(np.sum(win * np.abs(a_in.samples) ** 2))
    stored_norm = float(np.sum(wz * np.abs(b_stored.samples) ** 2))
    output_norm = float(np.sum(wout * np.abs(a_out.samples) ** 2))
    if input_norm <= 0:
        raise ValueError("zero input envelope")
    if stored_norm <= 0:
        raise ValueError(
            "storage efficiency is 0 (no stored excitation); "
            "retrieval efficiency is undefined"
        )
    storage = stored_norm / input_norm
    retrieval = output_norm / stored_norm
    return StageEfficiencies(
        storage=storage, retrieval=retrieval, total=storage * retrieval
    )


def _overlap_at(a_in, a_out_spline, out_lo, out_hi, delay):
    """|integral of conj(a_out(tau - delay)) a_in(tau) d tau|^2, with the
    shifted output treated as zero outside its own grid."""
    tau = a_in.grid.points()
    shifted = tau - delay
    inside = (shifted >= out_lo) & (shifted <= out_hi)
    vals = np.zeros(len(tau), dtype=complex)
    vals[inside] = a_out_spline(shifted[inside])
    wt = a_in.grid.trapezoid_weights()
    return abs(np.sum(wt * np.conj(vals) * a_in.samples)) ** 2


def fidelity(
    a_in: ComplexEnvelope, a_out: ComplexEnvelope, optimize_delay: bool = False
) -> tuple[float, float]:
    """Waveform overlap |<a_out(tau - delay), a_in>|^2 normalized by both
    intensities.  With optimize_delay the delay is chosen by a scan over
    grid-step shifts followed by one three-point parabolic refinement."""
    win = a_in.grid.trapezoid_weights()
    wout = a_out.grid.trapezoid_weights()
    norm_in = float(np.sum(win * np.abs(a_in.samples) ** 2))
    norm_out = float(np.sum(wout * np.abs(a_out.samples) ** 2))
    if norm_in <= 0 or norm_out <= 0:
        raise ValueError("zero-norm envelope")
    scale = norm_in * norm_out

    spline = CubicSpline(a_out.grid.points(), a_out.samples)
    lo, hi = a_out.grid.start, a_out.grid.end

    if not optimize_delay:
        return _overlap_at(a_in, spline, lo, hi, 0.0) / scale, 0.0

    h = a_in.grid.step
    # every lattice shift that leaves some overlap between the supports
    kmin = int(math.floor((a_in.grid.start - hi) / h))
    kmax = int(math.ceil((a_in.grid.end - lo) / h))
    best_k, best_val = 0, -1.0
    for k in range(kmin, kmax + 1):
        val = _overlap_at(a_in, spline, lo, hi, k * h)
        if val > best_val:
            best_k, best_val = k, val
    left = _overlap_at(a_in, spline, lo, hi, (best_k - 1) * h)
    right = _overlap_at(a_in, spline, lo, hi, (best_k + 1) * h)
    denom = left - 2.0 * best_val + right
    offset = 0.0
    if denom < 0:
        offset = 0.5 * (left - right) / denom
        offset = max(-1.0, min(1.0, offset))
    delay = (best_k + offset) * h
    return _overlap_at(a_in, spline, lo, hi, delay) / scale, delay


def time_bandwidth_product(lifetime: float, bandwidth_fwhm: float) -> float:
    """Memory lifetime expressed in units of the stored pulse duration:
    lifetime * bandwidth * pi / (2 ln 2)."""
    if bandwidth_fwhm <= 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth_fwhm}")
    if lifetime < 0:
        raise ValueError(f"lifetime must be >= 0, got {lifetime}")
    return lifetime * bandwidth_fwhm * math.pi / TWO_LN2


def noise_figures(mean_noise_photons: float, efficiency: float) -> NoiseFigures:
    """Noise metrics at one input photon per pulse: SNR = eta/<n>, total-
    to-noise TNR = SNR + 1, added noise mu1 = 1/SNR, and the single-photon
    fidelity 1 - 1/(SNR + 1)."""
    if mean_noise_photons < 0:
        raise ValueError(f"noise photons must be >= 0, got {mean_noise_photons}")
    if not (0.0 < efficiency <= 1.0):
        raise ValueError(f"efficiency must be in (0, 1], got {efficiency}")
    if mean_noise_photons == 0:
        return NoiseFigures(
            snr=math.inf,
            tnr=math.inf,
            single_photon_fidelity=1.0,
            mu1=0.0,
            mean_noise_photons=0.0,
        )
    snr = efficiency / mean_noise_photons
    return NoiseFigures(
        snr=snr,
        tnr=snr + 1.0,
        single_photon_fidelity=1.0 - 1.0 / (snr + 1.0),
        mu1=1.0 / snr,
        mean_noise_photons=mean_noise_photons,
    )


def fit_memory_lifetime(
    storage_times, efficiencies, model: str
) -> dict[str, float]:
    """Fit retrieved efficiency versus storage time to a caller-chosen decay
    model and convert the 1/e lifetime T to a half-life:

        exponential: eta0 * exp(-t/T),     T_half = T ln 2
        gaussian:    eta0 * exp(-(t/T)^2), T_half = T sqrt(ln 2)

    Returns {"lifetime", "half_life", "amplitude"}.
    """
    t = np.asarray(storage_times, dtype=float)
    y = np.asarray(efficiencies, dtype=float)
    if model not in ("exponential", "gaussian"):
        raise ValueError(f"model must be exponential or gaussian, got {model!r}")
    if len(t) < 3 or len(t) != len(y):
        raise ValueError("need at least 3 matched (time, efficiency) points")
    if np.any(y < 0):
        raise ValueError("efficiencies must be >= 0")

    if model == "exponential":

        def shape(tt, eta0, tconst):
            return eta0 * np.exp(-tt / tconst)

        conversion = math.log(2.0)
    else:

        def shape(tt, eta0, tconst):
            return eta0 * np.exp(-((tt / tconst) ** 2))

        conversion = math.sqrt(math.log(2.0))

    span = max(float(t.max() - t.min()), float(abs(t.max())), 1e-30)
    popt, _ = curve_fit(
        shape, t, y, p0=[max(float(y.max()), 1e-12), span],
        bounds=([0.0, 1e-30], [np.inf, np.inf]), maxfev=10000,
    )
    eta0, tconst = float(popt[0]), float(popt[1])
    return {
        "lifetime": tconst,
        "half_life": tconst * conversion,
        "amplitude": eta0,
    }
