"""Maximally sparse convex (MSC) regularization for sparse least squares."""

from .bound import DiagonalBound, certify, diagonal_bound, diagonal_bound_sdp, diagonal_bound_simple
from .imsc import ImscConfig, ImscTrace, run_imsc
from .operators import ArmaOperator, DenseOperator, LinearOperator, gram, min_eigenvalue
from .penalties import (
    PenaltySpec,
    ThresholdProps,
    a_from_slope,
    in_parameter_set,
    penalty_deriv,
    penalty_value,
    prox,
    threshold_props,
)
from .solvers import (
    ProblemSpec,
    SolveReport,
    check_optimality,
    debias,
    select_lambda,
    solve_lp_irl1,
    solve_lp_irl2,
    solve_penalized_ls,
    solve_weighted_l1,
)

__version__ = "0.1.0"
