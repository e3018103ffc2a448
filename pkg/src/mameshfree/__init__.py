"""Meshfree collocation for det(D^2 u) = f with Dirichlet data, using Wendland kernels."""
from __future__ import annotations

from .analysis import (
    DeltaRule,
    bernstein_probe,
    convergence_study,
    estimate_rate,
    l2_error,
    linf_error,
    sampling_probe,
)
from .catalog import manufactured
from .geometry import (
    DegenerateDiscretization,
    Ellipse,
    MeshMetrics,
    PointSet,
    UnitDisk,
    UnitSquare,
    generate_points,
    make_domain,
    metrics,
)
from .kernel import C2, C4, C6, KernelFamily, ScaledKernel, get_family, scaled_eval, scaled_jet
from .operator import CollocationSystem, HessianSample, Problem, frechet_apply, ma_det
from .solver import SolverConfig, SolveReport, SolverStalled, gauss_newton_solve, initial_guess
from .trialspace import Coefficients, GramFactorizationError, TrialSpace

__version__ = "0.1.0"

__all__ = [
    "C2", "C4", "C6", "Coefficients", "CollocationSystem", "DegenerateDiscretization",
    "DeltaRule", "Ellipse", "GramFactorizationError", "HessianSample", "KernelFamily",
    "MeshMetrics", "PointSet", "Problem", "ScaledKernel", "SolveReport", "SolverConfig",
    "SolverStalled", "TrialSpace", "UnitDisk", "UnitSquare", "bernstein_probe",
    "convergence_study", "estimate_rate", "frechet_apply", "gauss_newton_solve",
    "generate_points", "get_family", "initial_guess", "l2_error", "linf_error",
    "ma_det", "make_domain", "manufactured", "metrics", "sampling_probe",
    "scaled_eval", "scaled_jet",
]
