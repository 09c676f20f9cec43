"""Exception types and result flags shared across the package.

Exceptions fall into three groups: input rejection (InfeasibleInput,
DomainError, InvalidPath, DegenerateSplit, InfeasibleTruncation,
UnsupportedConstraintFamily), numerical failure (BracketFailure,
NewtonDivergence, SolverFailure, BoundaryEvaluation), and reporting
flags that are returned rather than raised (PrecisionLoss, ZeroHits).
"""

from __future__ import annotations

from dataclasses import dataclass


class UrnRatesError(Exception):
    """Base class for every error raised by this package."""


class DomainError(UrnRatesError):
    """An argument lies outside the mathematical domain of the operation."""


class InvalidPath(UrnRatesError):
    """An occupancy path violates monotonicity, ordering or conservation."""


class InfeasibleInput(UrnRatesError):
    """Terminal constraints cannot be met from the given initial occupancies."""


class DegenerateSplit(UrnRatesError):
    """A reducibility split produced a piece with zero urn mass."""


class InfeasibleTruncation(UrnRatesError):
    """Constraints cannot be satisfied within the truncated support."""


class UnsupportedConstraintFamily(UrnRatesError):
    """Terminal-set constraint outside the implemented families."""


class BracketFailure(UrnRatesError):
    """A root bracket could not be established.

    For feasible exponential inputs to the twist solvers this indicates a
    bug, not a user error; callers treat it as an assertion failure.
    """


class NewtonDivergence(UrnRatesError):
    """Newton iteration failed to converge after restarts."""

    def __init__(self, message: str, best_residual: float | None = None):
        super().__init__(message)
        self.best_residual = best_residual


class SolverFailure(UrnRatesError):
    """A nonlinear system solve did not reach the required residual."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class BoundaryEvaluation(UrnRatesError):
    """A derivative/residual grid touched a boundary point where the
    finite-difference stencil is undefined."""


@dataclass(frozen=True)
class PrecisionLoss:
    """Reported (never raised) when alternating-sum cancellation is severe.

    cancellation: sum of absolute term magnitudes divided by |result|.
    escalated: whether exact integer arithmetic was used to recover the
    value (``True`` means the returned value is exact to full precision
    despite the flag).
    """

    cancellation: float
    escalated: bool

    @property
    def severe(self) -> bool:
        return self.cancellation > 1e-6


@dataclass(frozen=True)
class ZeroHits:
    """Reported (never raised) when a Monte Carlo cell saw zero hits.

    exponent_lower_bound is the Wilson 95% lower bound on the event
    probability mapped to the exponent scale: the true exponent is at
    least this large with the stated confidence.
    """

    n: int
    trials: int
    exponent_lower_bound: float
