"""Scenario-driven command line front end.

A scenario is one JSON document: a `kind` selecting the computation, named
parameter axes (linear, logarithmic, or explicit value lists), fixed
parameters, a solver configuration, and an output block.  Grid points are
evaluated independently (optionally across processes) and collected by a
single order-preserving writer, so parallel runs emit byte-identical tables
to serial ones.  Dimensional inputs (Hz) are converted to normalized units
here and only here; the rest of the package never sees them.
"""

from __future__ import annotations

import hashlib
import importlib.metadata
import importlib.resources
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import click
import jsonschema
import numpy as np

from .core import (
    AxisGrid,
    GaussianControlSpec,
    MemoryParams,
    make_gaussian_signal,
)
from .optimize import optimal_efficiency_bound, optimize_gaussian_control
from .protocols import (
    AfcSpec,
    afc_efficiency,
    att_storage_efficiency,
    crib_efficiency,
    rose_efficiency,
)
from .sensitivity import FluctuationSpec, fluctuation_variance
from .solver import (
    SolverConfig,
    StorageRequest,
    default_time_grid,
    simulate_amplitude_phase,
    simulate_spectral,
    simulate_time_domain,
)

TWO_LN2 = 2.0 * math.log(2.0)

# The absorption column is 1 minus the mean pointwise intensity ratio
# |A_out/A_in|^2 over the input's +-2 sigma core.  Unlike the total energy
# ratio (which is strictly monotone in bandwidth for every optical depth),
# the ratio measured where the pulse actually lives captures the coherent
# backaction of a dense medium: the output reshapes into a zero-area
# waveform whose ringing beats against the Gaussian, so the curves
# oscillate at high optical depth once bandwidth ~ linewidth.
ABSORPTION_CORE_SIGMA = 2.0
ABSORPTION_SPAN_SIGMA = 4.2

KINDS = (
    "absorption_sweep",
    "gaussian_opt_map",
    "sensitivity_map",
    "protocol_table",
    "single_run",
)

# CLI-visible parameter names and the core field each one resolves to.
# Validation rejects anything not listed for the scenario kind at hand.
PARAMETER_FIELDS = {
    "d": "MemoryParams.d",
    "delta": "MemoryParams.delta",
    "gamma_b": "MemoryParams.gamma_b",
    "signal_fwhm": "signal GaussianControlSpec.duration_fwhm",
    "control_area": "GaussianControlSpec.area",
    "control_delay": "GaussianControlSpec.delay",
    "control_fwhm": "GaussianControlSpec.duration_fwhm",
    "epsilon_m": "FluctuationSpec.epsilon_m",
    "samples": "FluctuationSpec.samples",
    "bandwidth": "signal bandwidth, units of gamma (inverse duration)",
    "bandwidth_hz": "signal bandwidth, Hz (converted via linewidth_hz)",
    "linewidth_hz": "transition linewidth reference, Hz",
    "crib_linewidth_ratio": "crib_efficiency linewidth_ratio",
    "afc_finesse": "AfcSpec.tooth_spacing / AfcSpec.tooth_width",
    "afc_total_width": "AfcSpec.total_width",
    "rose_rephase_gap": "rose_efficiency rephase_gap",
    "rose_t2": "rose_efficiency t2 (null means infinite)",
    "formulation": "solver formulation for a single run",
}

AXIS_NAMES = {
    "absorption_sweep": {"d", "bandwidth", "bandwidth_hz", "linewidth_hz"},
    "gaussian_opt_map": {"d", "signal_fwhm"},
    "sensitivity_map": {"d", "signal_fwhm", "epsilon_m"},
    "protocol_table": {"d"},
    "single_run": set(),
}

FIXED_NAMES = {
    "absorption_sweep": {"d", "delta", "bandwidth", "bandwidth_hz", "linewidth_hz"},
    "gaussian_opt_map": {
        "d",
        "signal_fwhm",
        "control_area",
        "control_delay",
        "control_fwhm",
    },
    "sensitivity_map": {
        "d",
        "signal_fwhm",
        "control_area",
        "control_delay",
        "control_fwhm",
        "epsilon_m",
        "samples",
    },
    "protocol_table": {
        "crib_linewidth_ratio",
        "afc_finesse",
        "afc_total_width",
        "rose_rephase_gap",
        "rose_t2",
    },
    "single_run": {
        "d",
        "delta",
        "gamma_b",
        "signal_fwhm",
        "control_area",
        "control_delay",
        "control_fwhm",
        "formulation",
    },
}

COLUMNS = {
    "absorption_sweep": ("d", "linewidth", "bandwidth", "absorption"),
    "gaussian_opt_map": (
        "d",
        "signal_fwhm",
        "efficiency",
        "control_area",
        "control_delay",
        "control_fwhm",
        "converged",
        "evaluations",
    ),
    "sensitivity_map": (
        "d",
        "signal_fwhm",
        "epsilon_m",
        "mean_efficiency",
        "sigma_efficiency",
    ),
    "protocol_table": ("d", "att", "crib", "afc_forward", "afc_backward", "rose"),
    "single_run": (
        "input",
        "transmitted",
        "stored_p",
        "stored_b",
        "decayed_p",
        "decayed_b",
        "storage_efficiency",
        "residual",
    ),
}


class ConfigError(Exception):
    """Config-level failure; carries one message per violation."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class PointFailure(Exception):
    """Numerical failure at one grid point."""

    def __init__(self, index, point, message):
        self.index = index
        self.point = dict(point)
        desc = ", ".join(f"{k}={_fmt(v)}" for k, v in self.point.items())
        super().__init__(f"grid point {index} ({desc}): {message}")


def _schema() -> dict:
    text = (
        importlib.resources.files("memsim").joinpath("scenario.schema.json").read_text()
    )
    return json.loads(text)


def _fmt(value) -> str:
    """Fixed-precision cell rendering: 9 significant digits for floats."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "%.9g" % float(value)


def _round9(value: float) -> float:
    return float("%.9g" % float(value))


def _axis_values(spec: dict) -> list[float]:
    if "values" in spec:
        return [float(v) for v in spec["values"]]
    n = int(spec["points"])
    start, stop = float(spec["start"]), float(spec["stop"])
    if spec.get("scale", "linear") == "log":
        return [float(v) for v in np.geomspace(start, stop, n)]
    return [float(v) for v in np.linspace(start, stop, n)]


def _check_axis(name: str, spec: dict, out: list[str]) -> None:
    if "values" in spec:
        if len(spec["values"]) < 2:
            out.append(f"parameter_axes.{name}: axis needs at least 2 points")
        return
    if int(spec["points"]) < 2:
        out.append(f"parameter_axes.{name}: axis needs at least 2 points")
    start, stop = float(spec["start"]), float(spec["stop"])
    if spec.get("scale", "linear") == "log" and (start <= 0 or stop <= 0):
        out.append(f"parameter_axes.{name}: log axis requires positive endpoints")
    if start == stop:
        out.append(f"parameter_axes.{name}: axis endpoints must differ")


def _check_domain(name: str, value, key: str, out: list[str]) -> None:
    """Domain checks for a single named parameter value."""
    if name == "d" and value < 0:
        out.append(f"{key}: d must be >= 0")
    elif name in ("signal_fwhm", "control_fwhm") and value <= 0:
        out.append(f"{key}: {name} must be > 0")
    elif name == "control_area" and value < 0:
        out.append(f"{key}: control_area must be >= 0")
    elif name == "epsilon_m" and not (0.0 <= value < 0.5):
        out.append(f"{key}: epsilon_m must be in [0, 0.5)")
    elif name == "samples" and (value != int(value) or value < 100):
        out.append(f"{key}: samples must be an integer >= 100")
    elif name in ("bandwidth", "bandwidth_hz", "linewidth_hz") and value <= 0:
        out.append(f"{key}: {name} must be > 0")
    elif name == "crib_linewidth_ratio" and value <= 0:
        out.append(f"{key}: crib_linewidth_ratio must be > 0")
    elif name == "afc_finesse" and value <= 1:
        out.append(f"{key}: afc_finesse must be > 1")
    elif name == "afc_total_width" and value <= 0:
        out.append(f"{key}: afc_total_width must be > 0")
    elif name == "rose_rephase_gap" and value < 0:
        out.append(f"{key}: rose_rephase_gap must be >= 0")
    elif name == "rose_t2" and value is not None and value <= 0:
        out.append(f"{key}: rose_t2 must be > 0 or null")
    elif name == "gamma_b" and value < 0:
        out.append(f"{key}: gamma_b must be >= 0")


def validate_scenario(doc: dict) -> list[str]:
    """Schema plus semantic validation; returns every violation found."""
    validator = jsonschema.Draft202012Validator(_schema())
    out = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        path = ".".join(str(p) for p in err.absolute_path) or "(root)"
        out.append(f"{path}: {err.message}")
    if out:
        # Structural problems make the semantic checks unreliable; stop here.
        return out

    kind = doc["kind"]
    axes = doc.get("parameter_axes", {})
    fixed = doc.get("fixed_parameters", {})

    for name, spec in axes.items():
        if name not in AXIS_NAMES[kind]:
            out.append(
                f"parameter_axes.{name}: unknown axis for kind {kind!r}; "
                f"allowed: {sorted(AXIS_NAMES[kind])}"
            )
            continue
        _check_axis(name, spec, out)
        for v in _axis_values(spec) if _axis_ok(spec) else []:
            _check_domain(name, v, f"parameter_axes.{name}", out)
    for name, value in fixed.items():
        if name not in FIXED_NAMES[kind]:
            out.append(
                f"fixed_parameters.{name}: unknown parameter for kind {kind!r}; "
                f"allowed: {sorted(FIXED_NAMES[kind])}"
            )
            continue
        if name in axes:
            out.append(f"fixed_parameters.{name}: also declared as an axis")
        if name == "formulation":
            if value not in ("time", "spectral", "amplitude_phase"):
                out.append(
                    "fixed_parameters.formulation: must be one of "
                    "time, spectral, amplitude_phase"
                )
        elif isinstance(value, (int, float)) or value is None:
            _check_domain(name, value, f"fixed_parameters.{name}", out)
        else:
            out.append(f"fixed_parameters.{name}: must be a number")

    def present(name):
        return name in axes or name in fixed

    if kind == "absorption_sweep":
        if not present("d"):
            out.append("fixed_parameters.d: required for absorption_sweep")
        dim, norm = present("bandwidth_hz"), present("bandwidth")
        if dim == norm:
            out.append(
                "fixed_parameters.bandwidth: exactly one of bandwidth or "
                "bandwidth_hz is required"
            )
        if dim and not present("linewidth_hz"):
            out.append("fixed_parameters.linewidth_hz: required with bandwidth_hz")
        if norm and present("linewidth_hz"):
            out.append(
                "fixed_parameters.linewidth_hz: not allowed with normalized bandwidth"
            )
    elif kind in ("gaussian_opt_map", "sensitivity_map"):
        for name in ("d", "signal_fwhm"):
            if not present(name):
                out.append(f"fixed_parameters.{name}: required for {kind}")
        if kind == "sensitivity_map":
            for name in ("control_area", "control_delay", "control_fwhm"):
                if name not in fixed:
                    out.append(f"fixed_parameters.{name}: required for sensitivity_map")
            if not present("epsilon_m"):
                out.append("fixed_parameters.epsilon_m: required for sensitivity_map")
    elif kind == "protocol_table":
        if "d" not in axes:
            out.append("parameter_axes.d: protocol_table requires a d axis")
    elif kind == "single_run":
        if axes:
            out.append("parameter_axes: single_run takes no axes")
        for name in ("d", "signal_fwhm"):
            if name not in fixed:
                out.append(f"fixed_parameters.{name}: required for single_run")
        ctrl = [n for n in ("control_area", "control_delay", "control_fwhm") if n in fixed]
        if ctrl and len(ctrl) != 3:
            out.append(
                "fixed_parameters.control_area: control_area, control_delay, "
                "control_fwhm must be given together"
            )

    if doc.get("output", {}).get("include_envelopes") and kind != "single_run":
        out.append("output.include_envelopes: only available for single_run")
    try:
        _solver_config(doc)
    except ValueError as exc:
        out.append(f"solver: {exc}")
    return out


def _axis_ok(spec: dict) -> bool:
    """True when the axis can be expanded without raising."""
    if "values" in spec:
        return True
    return not (
        spec.get("scale", "linear") == "log"
        and (float(spec["start"]) <= 0 or float(spec["stop"]) <= 0)
    )


def _solver_config(doc: dict) -> SolverConfig:
    return SolverConfig(**doc.get("solver", {}))


def _point_grid(axes: dict) -> tuple[list[str], list[dict]]:
    """Cartesian product of the declared axes, first axis outermost."""
    names = list(axes)
    values = [_axis_values(axes[n]) for n in names]
    points = [{}]
    for name, vals in zip(names, values):
        points = [{**p, name: v} for p in points for v in vals]
    return names, points


def _normalized_duration(point: dict, fixed: dict) -> tuple[float, float, float]:
    """Resolve (duration g, linewidth column, bandwidth column) for one
    absorption point.  Dimensional form: the transition linewidth (Lorentzian
    FWHM, Hz) fixes the decay rate gamma = pi * linewidth_hz, and a
    transform-limited Gaussian of bandwidth BW (intensity FWHM, Hz) has
    normalized duration g = 2 ln2 * linewidth_hz / BW."""

    def get(name, default=None):
        if name in point:
            return point[name]
        return fixed.get(name, default)

    bw_hz = get("bandwidth_hz")
    if bw_hz is not None:
        lw = get("linewidth_hz")
        return TWO_LN2 * lw / bw_hz, lw, bw_hz
    bw = get("bandwidth")
    return TWO_LN2 / (math.pi * bw), 1.0, bw


def _control_from(fixed: dict, prefix: str = "control_"):
    keys = (prefix + "area", prefix + "delay", prefix + "fwhm")
    if not any(k in fixed for k in keys):
        return None
    return GaussianControlSpec(
        area=float(fixed[keys[0]]),
        delay=float(fixed[keys[1]]),
        duration_fwhm=float(fixed[keys[2]]),
    )


def _child_seed(seed: int, index: int) -> int:
    """Stable per-point seed, independent of execution order."""
    return int(np.random.SeedSequence(seed, spawn_key=(index,)).generate_state(1)[0])


def _eval_point(task: tuple) -> tuple:
    """Worker entry: evaluates one grid point, returning (index, row) or
    re-raising as a tagged failure message."""
    index, kind, point, fixed, solver, seed = task
    try:
        row = _EVALUATORS[kind](point, fixed, solver, seed, index)
        return index, "ok", row
    except Exception as exc:
        return index, "err", f"{type(exc).__name__}: {exc}"


def _eval_absorption(point, fixed, solver, seed, index):
    g, linewidth, bandwidth = _normalized_duration(point, fixed)
    d = float(point.get("d", fixed.get("d")))
    base = SolverConfig(**solver)
    # Beer-Lambert attenuation varies on the z scale 1/(2d); keep at least
    # 8 z points per optical depth so deep media stay resolved.
    cfg = SolverConfig(
        z_points=max(base.z_points, math.ceil(8.0 * d)),
        tau_points=base.tau_points,
        method=base.method,
        energy_tolerance=base.energy_tolerance,
    )
    sigma = g / (2.0 * math.sqrt(TWO_LN2))
    half = ABSORPTION_SPAN_SIGMA * sigma
    # The collective coupling drives polarization at an effective rate ~ d,
    # so the explicit stepper also needs tau steps below ~2.5/d.
    n = max(cfg.tau_points, math.ceil(2.0 * half * d / 2.5) + 1)
    grid = AxisGrid(-half, 2.0 * half / (n - 1), n)
    signal = make_gaussian_signal(g, grid)
    params = MemoryParams(d=d, delta=float(fixed.get("delta", 0.0)))
    res = simulate_time_domain(StorageRequest(params=params, signal=signal), cfg)
    tau = grid.points()
    weights = grid.trapezoid_weights()
    core = np.abs(tau) <= ABSORPTION_CORE_SIGMA * sigma
    ratio = np.abs(res.a_out.samples[core]) ** 2 / np.abs(signal.samples[core]) ** 2
    absorption = 1.0 - float(np.sum(weights[core] * ratio) / np.sum(weights[core]))
    return [d, linewidth, bandwidth, absorption]


def _eval_gaussian_opt(point, fixed, solver, seed, index):
    d = float(point.get("d", fixed.get("d")))
    g = float(point.get("signal_fwhm", fixed.get("signal_fwhm")))
    cfg = SolverConfig(**solver)
    n = cfg.tau_points
    grid = AxisGrid(-3.0 * g, 7.0 * g / (n - 1), n)
    signal = make_gaussian_signal(g, grid)
    init = GaussianControlSpec(
        area=float(fixed.get("control_area", 2.0 * math.pi)),
        delay=float(fixed.get("control_delay", 0.0)),
        duration_fwhm=float(fixed.get("control_fwhm", g)),
    )
    opt = optimize_gaussian_control(MemoryParams(d=d), signal, init, cfg)
    if not opt.converged:
        raise RuntimeError(
            f"optimizer restarts disagree at d={d:g}, signal_fwhm={g:g}"
        )
    c = opt.control
    return [d, g, opt.efficiency, c.area, c.delay, c.duration_fwhm, True, opt.evaluations]


def _eval_sensitivity(point, fixed, solver, seed, index):
    d = float(point.get("d", fixed.get("d")))
    g = float(point.get("signal_fwhm", fixed.get("signal_fwhm")))
    eps = float(point.get("epsilon_m", fixed.get("epsilon_m")))
    control = _control_from(fixed)
    spec = FluctuationSpec(
        epsilon_m=eps,
        samples=int(fixed.get("samples", 128)),
        seed=_child_seed(seed, index),
    )
    cfg = SolverConfig(**solver)
    report = fluctuation_variance(MemoryParams(d=d), g, control, spec, cfg)
    return [d, g, eps, report.mean_efficiency, report.std_efficiency]


def _eval_protocol(point, fixed, solver, seed, index):
    d = float(point["d"])
    finesse = float(fixed.get("afc_finesse", 10.0))
    spacing = 1.0
    afc = AfcSpec(
        total_width=float(fixed.get("afc_total_width", 10.0)),
        tooth_width=spacing / finesse,
        tooth_spacing=spacing,
        peak_d=d,
    )
    t2 = fixed.get("rose_t2")
    return [
        d,
        att_storage_efficiency(d),
        crib_efficiency(d, float(fixed.get("crib_linewidth_ratio", 1.0))),
        afc_efficiency(afc, "forward"),
        afc_efficiency(afc, "backward"),
        rose_efficiency(
            d,
            float(fixed.get("rose_rephase_gap", 0.0)),
            math.inf if t2 is None else float(t2),
        ),
    ]


_FORMULATIONS = {
    "time": simulate_time_domain,
    "spectral": simulate_spectral,
    "amplitude_phase": simulate_amplitude_phase,
}


def _single_run_result(fixed: dict, solver: dict):
    g = float(fixed["signal_fwhm"])
    control = _control_from(fixed)
    cfg = SolverConfig(**solver)
    grid = default_time_grid(g, control, points_per_fwhm=40)
    if grid.count < cfg.tau_points:
        ppf = math.ceil(40 * cfg.tau_points / grid.count)
        grid = default_time_grid(g, control, points_per_fwhm=ppf)
    params = MemoryParams(
        d=float(fixed["d"]),
        delta=float(fixed.get("delta", 0.0)),
        gamma_b=float(fixed.get("gamma_b", 0.0)),
    )
    request = StorageRequest(
        params=params, signal=make_gaussian_signal(g, grid), control=control
    )
    simulate = _FORMULATIONS[fixed.get("formulation", "time")]
    return simulate(request, cfg)


def _eval_single_run(point, fixed, solver, seed, index):
    res = _single_run_result(fixed, solver)
    e = res.energy
    return [
        e.input,
        e.transmitted,
        e.stored_p,
        e.stored_b,
        e.decayed_p,
        e.decayed_b,
        (e.stored_p + e.stored_b) / e.input,
        e.residual,
    ]


_EVALUATORS = {
    "absorption_sweep": _eval_absorption,
    "gaussian_opt_map": _eval_gaussian_opt,
    "sensitivity_map": _eval_sensitivity,
    "protocol_table": _eval_protocol,
    "single_run": _eval_single_run,
}


def _envelope_payload(res) -> dict:
    def pair(env):
        return {
            "re": [_round9(v) for v in env.samples.real],
            "im": [_round9(v) for v in env.samples.imag],
        }

    return {
        "tau": [_round9(v) for v in res.a_out.grid.points()],
        "z": [_round9(v) for v in res.b_final.grid.points()],
        "a_out": pair(res.a_out),
        "p_final": pair(res.p_final),
        "b_final": pair(res.b_final),
    }


def run_scenario(config_path: str, jobs: int, out_dir, seed_override):
    """Execute one scenario end to end; returns the output directory.

    Raises ConfigError for anything wrong with the document and PointFailure
    for a numerical failure at a grid point; no output files are written in
    either case.
    """
    started = time.monotonic()
    raw = open(config_path, "rb").read()
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"(root): not valid JSON: {exc}"])
    violations = validate_scenario(doc)
    if violations:
        raise ConfigError(violations)

    kind = doc["kind"]
    axes = doc.get("parameter_axes", {})
    fixed = doc.get("fixed_parameters", {})
    solver = doc.get("solver", {})
    output = doc["output"]
    seed = int(seed_override if seed_override is not None else output.get("seed", 0))

    _, points = _point_grid(axes)
    tasks = [(i, kind, p, fixed, solver, seed) for i, p in enumerate(points)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_eval_point, tasks))
    else:
        results = [_eval_point(t) for t in tasks]

    rows = []
    for (index, status, payload), point in zip(results, points):
        if status == "err":
            raise PointFailure(index, point or fixed, payload)
        rows.append(payload)

    target = out_dir if out_dir is not None else output["path"]
    os.makedirs(target, exist_ok=True)
    columns = COLUMNS[kind]
    if output.get("format", "csv") == "json":
        _write_json(os.path.join(target, "results.json"), columns, rows)
    else:
        _write_csv(os.path.join(target, "results.csv"), columns, rows)
    if output.get("include_envelopes"):
        payload = _envelope_payload(_single_run_result(fixed, solver))
        _write_text(
            os.path.join(target, "envelopes.json"),
            json.dumps(payload, separators=(",", ":")) + "\n",
        )
    manifest = {
        "config_sha256": hashlib.sha256(raw).hexdigest(),
        "kind": kind,
        "seed": seed,
        "rows": len(rows),
        "version": importlib.metadata.version("memsim"),
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    _write_text(
        os.path.join(target, "manifest.json"), json.dumps(manifest, indent=2) + "\n"
    )
    return target


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _write_csv(path: str, columns, rows) -> None:
    lines = [",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    _write_text(path, "\n".join(lines) + "\n")


def _write_json(path: str, columns, rows) -> None:
    payload = {
        "columns": list(columns),
        "rows": [
            [v if isinstance(v, bool) else _round9(v) if isinstance(v, float) else v for v in row]
            for row in rows
        ],
    }
    _write_text(path, json.dumps(payload, separators=(",", ":")) + "\n")


def _resolve_jobs(cli_jobs) -> int:
    if cli_jobs is not None:
        value = cli_jobs
    elif os.environ.get("MEMSIM_JOBS"):
        value = int(os.environ["MEMSIM_JOBS"])
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise ConfigError(["--jobs: must be >= 1"])
    return value


@click.group()
def main():
    """Quantum-memory simulation sweeps from declarative JSON scenarios."""


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--jobs", type=int, default=None, help="Parallel workers (default: MEMSIM_JOBS or CPU count).")
@click.option("--out", type=click.Path(file_okay=False), default=None, help="Override the output directory.")
@click.option("--seed", type=int, default=None, help="Override the config seed.")
def run(config_path, jobs, out, seed):
    """Execute a scenario config and write results plus a run manifest."""
    try:
        n_jobs = _resolve_jobs(jobs)
        target = run_scenario(config_path, n_jobs, out, seed)
    except ConfigError as exc:
        for line in exc.violations:
            click.echo(f"config error: {line}", err=True)
        sys.exit(1)
    except PointFailure as exc:
        click.echo(f"nonconvergence: {exc}", err=True)
        sys.exit(2)
    click.echo(f"wrote {target}")


@main.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
def validate(config_path):
    """Check a scenario config without executing it; lists every violation."""
    try:
        doc = json.loads(open(config_path, "rb").read())
    except json.JSONDecodeError as exc:
        click.echo(f"violation: (root): not valid JSON: {exc}", err=True)
        sys.exit(1)
    violations = validate_scenario(doc)
    if violations:
        for line in violations:
            click.echo(f"violation: {line}", err=True)
        sys.exit(1)
    click.echo(f"ok: {config_path}")


@main.command()
@click.option("--d", "d", type=float, required=True, help="Optical depth.")
@click.option("--points", type=int, default=200, show_default=True, help="Quadrature points.")
def bound(d, points):
    """Print the optical-depth-limited storage efficiency bound."""
    if d < 0:
        click.echo("config error: d must be >= 0", err=True)
        sys.exit(1)
    click.echo("%.6f" % optimal_efficiency_bound(d, quadrature_points=points))


@main.command()
def version():
    """Print the package version."""
    click.echo(importlib.metadata.version("memsim"))


if __name__ == "__main__":
    main()
