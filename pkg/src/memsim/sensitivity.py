"""Variance-based sensitivity of memory efficiency to parameter
fluctuations and drift: Monte-Carlo fluctuation variance, one-at-a-time
variance under uniform drift, first-order Sobol' indices, and a per-knot
control-shape drift map."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    ComplexEnvelope,
    GaussianControlSpec,
    MemoryParams,
    SplineControlSpec,
    make_gaussian_signal,
)
from .optimize import _storage_fraction
from .solver import SolverConfig, default_time_grid


@dataclass(frozen=True)
class FluctuationSpec:
    """Fractional fluctuation magnitude, Monte-Carlo sample count, seed."""

    epsilon_m: float
    samples: int
    seed: int

    def __post_init__(self):
        if self.epsilon_m < 0:
            raise ValueError(f"epsilon_m must be >= 0, got {self.epsilon_m}")
        if self.epsilon_m >= 0.5:
            raise ValueError(
                f"epsilon_m must be < 0.5 (got {self.epsilon_m}); larger "
                "fluctuations drive the parameters negative too often"
            )
        if self.samples < 100:
            raise ValueError(f"need >= 100 samples, got {self.samples}")


@dataclass(frozen=True)
class ParameterEffect:
    variance: float
    index: float  # clipped to [0, 1]
    raw_index: float


@dataclass(frozen=True)
class SensitivityReport:
    mean_efficiency: float
    std_efficiency: float
    per_parameter: dict[str, ParameterEffect]


def _gaussian_pairs(rng, centers, sigmas, count):
    """Joint draws centered on `centers`; any draw with a non-positive
    coordinate is rejected and redrawn, keeping physical parameters."""
    out = np.empty((count, len(centers)))
    for i in range(count):
        while True:
            draw = centers + sigmas * rng.standard_normal(len(centers))
            if np.all(draw > 0):
                out[i] = draw
                break
    return out


def _solver_eta(control, cfg):
    def eta(d: float, g: float) -> float:
        grid = default_time_grid(g, control, points_per_fwhm=24)
        if grid.count < cfg.tau_points:
            grid = default_time_grid(
                g,
                control,
                points_per_fwhm=int(24 * cfg.tau_points / grid.count) + 1,
            )
        signal = make_gaussian_signal(g, grid)
        params = MemoryParams(d=d, delta=0.0, gamma_b=0.0)
        return _storage_fraction(grid, signal.samples, params, control, cfg)

    return eta


def fluctuation_variance(
    params: MemoryParams,
    signal_duration: float,
    control: GaussianControlSpec,
    spec: FluctuationSpec,
    cfg: SolverConfig,
    eta_fn=None,
) -> SensitivityReport:
    """Monte-Carlo spread of the storage efficiency when the optical depth d
    and the signal duration g (in linewidth units) fluctuate as independent
    zero-mean Gaussians with standard deviations epsilon_m * d and
    epsilon_m * g, while the control stays fixed at the optimum for the mean
    parameters.  per_parameter holds one-parameter passes ("d" and "g") with
    first-order indices against the joint variance.

    eta_fn(d, g) overrides the efficiency evaluation (testing hook and
    custom-model support); by default a solver storage run is used.
    """
    if signal_duration <= 0:
        raise ValueError(f"signal duration must be > 0, got {signal_duration}")
    evaluator = eta_fn if eta_fn is not None else _solver_eta(control, cfg)
    centers = np.array([params.d, signal_duration])
    if np.any(centers <= 0):
        raise ValueError("fluctuation analysis needs d > 0 and duration > 0")
    sigmas = spec.epsilon_m * centers

    if spec.epsilon_m == 0:
        eta0 = evaluator(*centers)
        return SensitivityReport(
            mean_efficiency=eta0,
            std_efficiency=0.0,
            per_parameter={
                "d": ParameterEffect(0.0, 0.0, 0.0),
                "g": ParameterEffect(0.0, 0.0, 0.0),
            },
        )

    seeds = np.random.SeedSequence(spec.seed).spawn(3)
    joint = _gaussian_pairs(
        np.random.default_rng(seeds[0]), centers, sigmas, spec.samples
    )
    etas = np.array([evaluator(d, g) for d, g in joint])
    mean = float(np.mean(etas))
    var = float(np.var(etas, ddof=1))
    std = math.sqrt(max(var, 0.0))

    n = spec.samples
    if std > 0:
        # standard error of the sample std from the fourth central moment
        m4 = float(np.mean((etas - mean) ** 4))
        se_var = math.sqrt(max(m4 - var**2 * (n - 3) / (n - 1), 0.0) / n)
        se_std = se_var / (2.0 * std)
        if se_std > 0.1 * std:
            raise ValueError(
                f"sample size too small: std standard error {se_std:.3g} "
                f"exceeds 10% of std {std:.3g}; increase samples"
            )

    per = {}
    for name, axis, child in (("d", 0, seeds[1]), ("g", 1, seeds[2])):
        one_sigmas = np.zeros(2)
        one_sigmas[axis] = sigmas[axis]
        draws = _gaussian_pairs(
            np.random.default_rng(child), centers, one_sigmas, spec.samples
        )
        vals = np.array([evaluator(d, g) for d, g in draws])
        v_i = float(np.var(vals, ddof=1))
        raw = v_i / var if var > 0 else 0.0
        per[name] = ParameterEffect(
            variance=v_i, index=float(np.clip(raw, 0.0, 1.0)), raw_index=raw
        )
    return SensitivityReport(
        mean_efficiency=mean, std_efficiency=std, per_parameter=per
    )


def oat_variance(eta_fn, parameter_range, grid_points: int = 256) -> float:
    """Variance of eta_fn under a uniform distribution on [min, max], by
    trapezoidal quadrature on a parameter grid (second-order accurate)."""
    lo, hi = parameter_range
    if not lo < hi:
        raise ValueError(f"need min < max, got [{lo}, {hi}]")
    if grid_points < 32:
        raise ValueError(f"need >= 32 grid points, got {grid_points}")
    x = np.linspace(lo, hi, grid_points)
    y = np.array([float(eta_fn(v)) for v in x])
    mean = np.trapezoid(y, x) / (hi - lo)
    second = np.trapezoid(y**2, x) / (hi - lo)
    return float(max(second - mean**2, 0.0))


def _eval_rows(eta_fn, rows):
    try:
        out = np.asarray(eta_fn(rows), dtype=float)
        if out.shape == (len(rows),):
            return out
    except Exception:
        pass
    return np.array([float(eta_fn(*row)) for row in rows])


def sobol_first_order(
    eta_fn,
    ranges,
    base_samples: int,
    seed: int,
    names: tuple[str, ...] | None = None,
) -> SensitivityReport:
    """First-order Sobol' indices S_i = V_i / V_tot by the paired-matrix
    estimator: two independent uniform sample blocks A and B, plus one block
    per parameter equal to A with that column taken from B.  V_i is
    estimated as mean(f_B * (f_ABi - f_A)).  Deterministic for a fixed seed;
    eta_fn may be vectorized over an (n, k) array or a plain scalar
    function."""
    ranges = [tuple(r) for r in ranges]
    k = len(ranges)
    if k < 2:
        raise ValueError(f"need >= 2 parameters, got {k}")
    if base_samples < 256:
        raise ValueError(f"need >= 256 base samples, got {base_samples}")
    for lo, hi in ranges:
        if not lo < hi:
            raise ValueError(f"invalid range [{lo}, {hi}]")
    if names is None:
        names = tuple(f"x{i + 1}" for i in range(k))
    if len(names) != k:
        raise ValueError("names length must match the number of parameters")

    rng = np.random.default_rng(seed)
    lows = np.array([r[0] for r in ranges])
    spans = np.array([r[1] - r[0] for r in ranges])
    a = lows + spans * rng.random((base_samples, k))
    b = lows + spans * rng.random((base_samples, k))
    f_a = _eval_rows(eta_fn, a)
    f_b = _eval_rows(eta_fn, b)
    all_f = np.concatenate([f_a, f_b])
    v_tot = float(np.var(all_f, ddof=1))
    mean = float(np.mean(all_f))

    per = {}
    for i in range(k):
        ab = a.copy()
        ab[:, i] = b[:, i]
        f_ab = _eval_rows(eta_fn, ab)
        v_i = float(np.mean(f_b * (f_ab - f_a)))
        raw = v_i / v_tot if v_tot > 0 else 0.0
        if raw < -0.05:
            raise ValueError(
                f"estimator noise: first-order index for {names[i]} came out "
                f"{raw:.3f}; increase base_samples"
            )
        per[names[i]] = ParameterEffect(
            variance=v_i, index=float(np.clip(raw, 0.0, 1.0)), raw_index=raw
        )
    return SensitivityReport(
        mean_efficiency=mean,
        std_efficiency=math.sqrt(max(v_tot, 0.0)),
        per_parameter=per,
    )


def control_spline_sensitivity_map(
    params: MemoryParams,
    signal: ComplexEnvelope,
    optimal_control: SplineControlSpec,
    epsilon_g: float,
    cfg: SolverConfig,
) -> np.ndarray:
    """Per-knot drift sensitivity of the storage efficiency: each knot value
    is perturbed by +-epsilon_g of its own magnitude, the larger |change in
    efficiency| is recorded, and the map is normalized to peak 1.  Knots
    with zero amplitude cannot drift (a fraction of zero is zero) and score
    exactly 0."""
    if epsilon_g <= 0:
        raise ValueError(f"epsilon_g must be > 0, got {epsilon_g}")
    grid = signal.grid
    base = _storage_fraction(grid, signal.samples, params, optimal_control, cfg)
    values = np.asarray(optimal_control.knot_values, dtype=complex)
    times = np.asarray(optimal_control.knot_times, dtype=float)
    deltas = np.zeros(len(values))
    for j, v in enumerate(values):
        if abs(v) == 0:
            continue
        worst = 0.0
        for sign in (1.0, -1.0):
            perturbed = values.copy()
            perturbed[j] = v * (1.0 + sign * epsilon_g)
            control = SplineControlSpec(
                knot_times=times,
                knot_values=perturbed,
                interpolation=optimal_control.interpolation,
            )
            eta = _storage_fraction(grid, signal.samples, params, control, cfg)
            worst = max(worst, abs(eta - base))
        deltas[j] = worst
    peak = deltas.max()
    if peak > 0:
        deltas = deltas / peak
    return deltas
