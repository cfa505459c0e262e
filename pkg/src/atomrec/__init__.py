"""Atomic-norm signal recovery: norms, solvers, null space certificates and experiments."""

__version__ = "0.1.0"

from .atoms import (CanonicalBasis, FiniteFrame, RankOneManifold, atomic_norm, best_s_approx,
                    dual_atomic_norm, equivalence_constant, ring_frame, tail)
from .errors import (AtomrecError, ConfigError, ConvergenceError, DimensionError, InfeasibleError,
                     RefusedError, SolverBudgetError)
from .nsp import (check_plain_nsp, check_s_even, check_splittable, min_measurement_bound,
                  robust_params, stable_rho, strong_constant, theoretical_bound)
from .random_measure import (EnsembleSpec, empirical_q, empirical_width, estimate_params,
                             gaussian_width, mendelson_check, q_lower_bound, recommended_m,
                             sample_operator)
from .solvers import (MeasurementOperator, SolveResult, SolverOptions, exhaustive_l1_oracle,
                      soft_threshold, solve_min_atomic, sv_threshold)

__all__ = [
    "CanonicalBasis", "FiniteFrame", "RankOneManifold", "ring_frame",
    "atomic_norm", "dual_atomic_norm", "equivalence_constant", "best_s_approx", "tail",
    "MeasurementOperator", "SolverOptions", "SolveResult", "solve_min_atomic",
    "soft_threshold", "sv_threshold", "exhaustive_l1_oracle",
    "stable_rho", "strong_constant", "robust_params", "check_plain_nsp", "check_splittable",
    "check_s_even", "theoretical_bound", "min_measurement_bound",
    "EnsembleSpec", "sample_operator", "estimate_params", "q_lower_bound", "gaussian_width",
    "empirical_width", "empirical_q", "recommended_m", "mendelson_check",
    "AtomrecError", "ConfigError", "ConvergenceError", "DimensionError", "InfeasibleError",
    "RefusedError", "SolverBudgetError",
]
