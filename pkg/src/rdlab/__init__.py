"""Reaction-diffusion comparison lab.

Finite-difference IMEX solvers, sampled certifiers for structural conditions
on reaction terms, a regularization pipeline and a comparison harness.
"""

from .errors import (
    BlowUpError, ConfigError, GridError, PreconditionError, RdlabError, ReactionEvaluationError,
    RegularizationError,
)
from .grid import SpatialGrid, build_grid, constant_field, principal_eigenvalue, sine_field
from .harness import (
    run_comparison, run_pipeline_comparison, run_shifted_comparison, regularization_convergence_study,
)
from .models import build_model, lotka_volterra, uncoupled_linear, uncoupled_logistic
from .reaction import (
    ReactionSystem, SamplePlan, check_cooperative, check_dissipation, check_growth,
    check_one_sided_lipschitz, check_positivity_compat, dominates, exp_shift,
)
from .regularize import comparison_pipeline, mollify, regularize_pipeline, truncate
from .reports import ComparisonReport, ConditionReport, EstimateReport
from .solver import SolveConfig, Trajectory, check_energy_inequality, integrate

__version__ = "0.1.0"

__all__ = [
    "BlowUpError", "ConfigError", "GridError", "PreconditionError", "RdlabError",
    "ReactionEvaluationError", "RegularizationError", "SpatialGrid", "build_grid", "constant_field",
    "principal_eigenvalue", "sine_field", "run_comparison", "run_pipeline_comparison",
    "run_shifted_comparison", "regularization_convergence_study", "build_model", "lotka_volterra",
    "uncoupled_linear", "uncoupled_logistic", "ReactionSystem", "SamplePlan", "check_cooperative",
    "check_dissipation", "check_growth", "check_one_sided_lipschitz", "check_positivity_compat",
    "dominates", "exp_shift", "comparison_pipeline", "mollify", "regularize_pipeline", "truncate",
    "ComparisonReport", "ConditionReport", "EstimateReport", "SolveConfig", "Trajectory",
    "check_energy_inequality", "integrate",
]
