"""Multivariate matrix and L^p expectiles: deterministic solvers,
Robbins-Monro stochastic estimation, and executable coherence checks."""

from .core import (
    ExpectileResult,
    Level,
    SampleMatrix,
    ScoringMatrix,
    residual,
    score,
    stop_loss_terms,
)
from .distributions import (
    Exponential,
    Fgm,
    Independence,
    ModelSpec,
    Pareto,
    fgm_conditional_inverse,
    sample,
)
from .univariate import univariate_expectile
from .deterministic import (
    GradientConfig,
    LpConfig,
    NewtonConfig,
    solve_analytic,
    solve_empirical,
    solve_lp,
)
from .stochastic import RmConfig, RmEstimate, StepSchedule, rm_estimate, step_schedule_sweep
from .analysis import (
    AlphaDerivativeSystem,
    alpha_derivative,
    alpha_derivative_system,
    alpha_of_point,
    asymptotic_sweep,
)
from .properties import PropertyReport, run_property_suite

__version__ = "0.1.0"

__all__ = [
    "Level",
    "ScoringMatrix",
    "SampleMatrix",
    "ExpectileResult",
    "score",
    "residual",
    "stop_loss_terms",
    "Exponential",
    "Pareto",
    "Independence",
    "Fgm",
    "ModelSpec",
    "sample",
    "fgm_conditional_inverse",
    "univariate_expectile",
    "NewtonConfig",
    "GradientConfig",
    "LpConfig",
    "solve_analytic",
    "solve_empirical",
    "solve_lp",
    "StepSchedule",
    "RmConfig",
    "RmEstimate",
    "rm_estimate",
    "step_schedule_sweep",
    "alpha_of_point",
    "alpha_derivative",
    "alpha_derivative_system",
    "AlphaDerivativeSystem",
    "asymptotic_sweep",
    "PropertyReport",
    "run_property_suite",
    "__version__",
]
