"""Large-deviation rates and minimizing paths for occupancy processes.

Throw r = floor(beta * n) balls into n urns, each uniformly at
random. Track the fraction of urns containing 0, 1, ..., I balls
plus an overflow bucket (more than I). This package computes, for
events written in terms of the final occupancy fractions:

  * feasibility of endpoint constraints and their decomposition
    into independent subproblems,
  * the large-deviation rate (the exponential decay speed of the
    event probability in n) via explicitly solvable tilted count
    distributions,
  * the minimizing occupancy path, i.e. the trajectory the process
    follows conditioned on the rare event, with certificates that
    it satisfies the governing variational equations,
  * closed-form treatments of three standard events (every urn
    occupied, too many overflowing urns, incomplete collections),
  * independent cross-checks: exact finite-n combinatorics, a
    generic entropy minimizer, and Monte Carlo simulation with a
    compiled throw kernel and a pure-Python twin.
"""

from .errors import (BoundaryEvaluation, BracketFailure, DegenerateSplit,
                     DomainError, InfeasibleInput, InfeasibleTruncation,
                     InvalidPath, NewtonDivergence, PrecisionLoss,
                     SolverFailure, UnsupportedConstraintFamily,
                     UrnRatesError, ZeroHits)
from .types import (CountDistribution, DecompositionPiece,
                    EndpointConstraint, Feasibility, OccupancyPathGrid,
                    SimplexVector, default_truncation, simplex)
from .entropy import (poisson_head_mass, poisson_log_pmf, poisson_pmf,
                      poisson_tail_mass, poisson_tail_mean,
                      relative_entropy)
from .paths import (ComboPath, LinearPath, PiecewisePath, ValidityReport,
                    ZeroCostPath, path_cost, rate_to_velocity,
                    validity_check, zero_cost_path)
from .feasibility import (feasibility_check, feasibility_violation,
                          irreducible_decompose, recombine_rates)
from .twist import (EmptyTwist, GeneralTwist, TwistCase, compute_C_empty,
                    minimizer_empty, minimizer_general, solve_empty_twist,
                    solve_general, solve_rho_empty, terminal_rate_empty,
                    terminal_rate_general)
from .extremal import (EmptyExtremal, GeneralExtremal, build_empty_extremal,
                       build_general_extremal, closed_form_cost,
                       complete_monotone_check, el_residual)
from .kernel import ACTIVE_LANE, available_lanes, kernel_info
from .simulate import (SimConfig, SimResult, level_threshold,
                       round_initial_counts, simulate, throw_count)
from .oracle import (ExponentEstimate, TruncatedProgram, empirical_exponent,
                     endpoint_program, entropy_min_oracle,
                     exact_empty_urn_pmf, exact_empty_urn_tail)
from .applications import (ClassicalSolution, CouponSolution,
                           LinearTerminalConstraint, OverflowSolution,
                           classical_rate, coupon_rate, overflow_rate,
                           terminal_set_rate)

__version__ = "0.1.0"

__all__ = [
    "BoundaryEvaluation", "BracketFailure", "DegenerateSplit",
    "DomainError", "InfeasibleInput", "InfeasibleTruncation",
    "InvalidPath", "NewtonDivergence", "PrecisionLoss", "SolverFailure",
    "UnsupportedConstraintFamily", "UrnRatesError", "ZeroHits",
    "CountDistribution", "DecompositionPiece", "EndpointConstraint",
    "Feasibility", "OccupancyPathGrid", "SimplexVector",
    "default_truncation", "simplex",
    "poisson_head_mass", "poisson_log_pmf", "poisson_pmf",
    "poisson_tail_mass", "poisson_tail_mean", "relative_entropy",
    "ComboPath", "LinearPath", "PiecewisePath", "ValidityReport",
    "ZeroCostPath", "path_cost", "rate_to_velocity", "validity_check",
    "zero_cost_path",
    "feasibility_check", "feasibility_violation", "irreducible_decompose",
    "recombine_rates",
    "EmptyTwist", "GeneralTwist", "TwistCase", "compute_C_empty",
    "minimizer_empty", "minimizer_general", "solve_empty_twist",
    "solve_general", "solve_rho_empty", "terminal_rate_empty",
    "terminal_rate_general",
    "EmptyExtremal", "GeneralExtremal", "build_empty_extremal",
    "build_general_extremal", "closed_form_cost",
    "complete_monotone_check", "el_residual",
    "ACTIVE_LANE", "available_lanes", "kernel_info",
    "SimConfig", "SimResult", "level_threshold", "round_initial_counts",
    "simulate", "throw_count",
    "ExponentEstimate", "TruncatedProgram", "empirical_exponent",
    "endpoint_program", "entropy_min_oracle", "exact_empty_urn_pmf",
    "exact_empty_urn_tail",
    "ClassicalSolution", "CouponSolution", "LinearTerminalConstraint",
    "OverflowSolution", "classical_rate", "coupon_rate", "overflow_rate",
    "terminal_set_rate",
    "__version__",
]
