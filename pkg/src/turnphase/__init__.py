"""Slowly varying phase functions for y'' + q y = 0 with turning points."""

from .bench import ExperimentParams, ExperimentReport, diff_metric, reference_solve, run_experiment
from .chebseries import PiecewiseExpansion, clenshaw, tail_ratio
from .exceptions import (
    ConfigurationError,
    DomainError,
    LocalSolveError,
    ResolutionError,
    TurnphaseError,
)
from .odesolve import AdaptiveConfig, SystemSpec, solve_adaptive
from .phasefn import (
    CoefficientSpec,
    MultiPhaseBasis,
    PhaseBasis,
    PhaseConfig,
    PhaseFunction,
    TurningPointSpec,
    basis_eval,
    build_phase,
    build_phase_multi,
    connection_coeffs,
    fit_solution,
)
from .serialize import deserialize_expansion, serialize_expansion

__version__ = "0.1.0"

__all__ = [
    "AdaptiveConfig",
    "CoefficientSpec",
    "ConfigurationError",
    "DomainError",
    "ExperimentParams",
    "ExperimentReport",
    "LocalSolveError",
    "MultiPhaseBasis",
    "PhaseBasis",
    "PhaseConfig",
    "PhaseFunction",
    "PiecewiseExpansion",
    "ResolutionError",
    "SystemSpec",
    "TurnphaseError",
    "TurningPointSpec",
    "basis_eval",
    "build_phase",
    "build_phase_multi",
    "clenshaw",
    "connection_coeffs",
    "deserialize_expansion",
    "diff_metric",
    "fit_solution",
    "reference_solve",
    "run_experiment",
    "serialize_expansion",
    "solve_adaptive",
    "tail_ratio",
]
