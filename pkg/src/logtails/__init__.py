"""Tail asymptotics, conditional laws and importance sampling for sums of log-normals."""

from .conditional_laws import (
    LimitingGaussian,
    conditional_laplace_left,
    conditional_laplace_right,
    limiting_gaussian_left,
    limiting_gaussian_right,
)
from .errors import *  # noqa: F401,F403
from .kernels import BACKEND
from .matrix_core import CovMatrix, ModelSpec, cholesky, invert_with_rowsums, principal_submatrix
from .monte_carlo import (
    McConfig,
    McEstimate,
    estimate_left_is,
    estimate_left_standard,
    estimate_right_is,
    estimate_right_standard,
    optimal_drift_left,
    optimal_drift_right,
    reduction_factor,
    reduction_table,
)
from .risk_engine import (
    MarketModel,
    StressReport,
    portfolio_conditional_value,
    stress_index_crash,
    stress_spread,
    to_model,
)
from .simplex_qp import FeasibleRegion, QpSolution, check_assumption, solve
from .tail_asymptotics import (
    TailAsymptote,
    left_tail_cdf_asymptote,
    left_tail_density_asymptote,
    right_tail_cdf_asymptote,
    right_tail_density_asymptote,
    right_tail_mixed,
)

__version__ = "0.1.0"
