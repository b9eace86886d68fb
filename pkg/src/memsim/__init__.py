"""Simulation and optimization toolkit for ensemble optical quantum
memories: Maxwell-Bloch solvers, protocol closed forms, storage-mode
optimization, and sensitivity analysis, with a scenario-driven CLI."""

from .core import (
    AxisGrid,
    ComplexEnvelope,
    EnergyBudget,
    GaussianControlSpec,
    InhomogeneousProfile,
    MemoryParams,
    SimulationResult,
    SplineControlSpec,
    bandwidth_from_duration,
    envelope_l2,
    evaluate_control,
    make_gaussian_signal,
)
from .metrics import (
    NoiseFigures,
    StageEfficiencies,
    fidelity,
    fit_memory_lifetime,
    noise_figures,
    stage_efficiencies,
    time_bandwidth_product,
    total_efficiency,
)
from .optimize import (
    GaussianOptimum,
    ModeDecomposition,
    StorageKernel,
    build_storage_kernel,
    decompose_kernel,
    optimal_efficiency_bound,
    optimize_control_shape,
    optimize_gaussian_control,
    optimize_signal_shape,
)
from .protocols import (
    AfcSpec,
    FiberSpec,
    afc_comb_profile,
    afc_efficiency,
    ats_closed_form,
    att_storage_efficiency,
    crib_efficiency,
    eit_reduced_simulate,
    fiber_delay_efficiency,
    fiber_dispersion_tradeoff,
    fiber_one_over_e_time,
    intensity_fwhm,
    raman_reduced_simulate,
    rose_efficiency,
)
from .sensitivity import (
    FluctuationSpec,
    ParameterEffect,
    SensitivityReport,
    control_spline_sensitivity_map,
    fluctuation_variance,
    oat_variance,
    sobol_first_order,
)
from .solver import (
    AliasingError,
    GridCoverageError,
    NonconvergenceError,
    SolverConfig,
    StorageRequest,
    default_time_grid,
    simulate_amplitude_phase,
    simulate_inhomogeneous,
    simulate_linear_absorption,
    simulate_retrieval,
    simulate_spectral,
    simulate_time_domain,
)

__version__ = "0.1.0"

__all__ = [
    "AxisGrid",
    "ComplexEnvelope",
    "EnergyBudget",
    "GaussianControlSpec",
    "InhomogeneousProfile",
    "MemoryParams",
    "SimulationResult",
    "SplineControlSpec",
    "bandwidth_from_duration",
    "envelope_l2",
    "evaluate_control",
    "make_gaussian_signal",
    "NoiseFigures",
    "StageEfficiencies",
    "fidelity",
    "fit_memory_lifetime",
    "noise_figures",
    "stage_efficiencies",
    "time_bandwidth_product",
    "total_efficiency",
    "GaussianOptimum",
    "ModeDecomposition",
    "StorageKernel",
    "build_storage_kernel",
    "decompose_kernel",
    "optimal_efficiency_bound",
    "optimize_control_shape",
    "optimize_gaussian_control",
    "optimize_signal_shape",
    "AfcSpec",
    "FiberSpec",
    "afc_comb_profile",
    "afc_efficiency",
    "ats_closed_form",
    "att_storage_efficiency",
    "crib_efficiency",
    "eit_reduced_simulate",
    "fiber_delay_efficiency",
    "fiber_dispersion_tradeoff",
    "fiber_one_over_e_time",
    "intensity_fwhm",
    "raman_reduced_simulate",
    "rose_efficiency",
    "FluctuationSpec",
    "ParameterEffect",
    "SensitivityReport",
    "control_spline_sensitivity_map",
    "fluctuation_variance",
    "oat_variance",
    "sobol_first_order",
    "AliasingError",
    "GridCoverageError",
    "NonconvergenceError",
    "SolverConfig",
    "StorageRequest",
    "default_time_grid",
    "simulate_amplitude_phase",
    "simulate_inhomogeneous",
    "simulate_linear_absorption",
    "simulate_retrieval",
    "simulate_spectral",
    "simulate_time_domain",
    "__version__",
]
