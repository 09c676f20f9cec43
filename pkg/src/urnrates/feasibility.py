"""Feasibility classification and irreducible decomposition.

An endpoint constraint (alpha, omega, beta) is reachable by some
valid path iff two inequality families hold:

  monotonicity: sum_{j<=i} alpha_j >= sum_{j<=i} omega_j for every
    level i <= I (urns only ever gain balls, so the cumulative
    occupancies can only move down);
  conservation: the minimum ball content of omega cannot exceed the
    initial ball content plus the throw budget,
    sum_i i*omega_i + (I+1)*omega_{I+} <= sum_k k*alpha_k + beta.

Reachable constraints split three ways. If conservation is tight the
throw budget is exactly exhausted (polynomial family: the minimizing
count distribution has bounded support). If it is slack and the
target puts mass in the overflow bucket, the surplus is absorbed
there (exponential family). If it is slack but the target has an
empty overflow bucket, no count distribution can both meet the
targets and use the whole budget: every path to the target wastes
balls it has no place to put, at infinite cost. The event then
decays faster than any exponential (infinite-rate verdict).

The initial overflow slot is treated as urns holding exactly I+1
balls for the conservation accounting (the only determinate
convention); solvers additionally require it to be empty.

A feasible constraint is irreducible when monotonicity is strict
below level I. At every non-strict level the problem splits: urns at
or below that level never interact with urns above it, so the
problem decomposes into independent bands, each re-indexed to a
standalone constraint. Each interior band's ball budget is pinned by
its own endpoint data (making it a polynomial-family subproblem);
the top band absorbs the remaining budget.
"""

from __future__ import annotations

import math

from .errors import DegenerateSplit, DomainError, InfeasibleInput
from .types import (DecompositionPiece, EndpointConstraint, Feasibility,
                    SimplexVector)

__all__ = [
    "feasibility_check",
    "feasibility_violation",
    "irreducible_decompose",
    "recombine_rates",
    "Feasibility",
    "EQUALITY_RTOL",
]

EQUALITY_RTOL = 1e-9
_ATOL = 1e-9


def _ball_balance(c: EndpointConstraint) -> tuple[float, float]:
    """(target minimum ball content, initial content + budget)."""
    cap = c.capacity_index
    need = c.omega.head_mean() + (cap + 1) * c.omega.overflow
    have = c.alpha.head_mean() + (cap + 1) * c.alpha.overflow + c.beta
    return need, have


def feasibility_violation(c: EndpointConstraint) -> str | None:
    """Human-readable description of the violated family, or None."""
    psi_a, psi_w = c.alpha.psi(), c.omega.psi()
    for i, (pa, pw) in enumerate(zip(psi_a, psi_w)):
        if pw > pa + _ATOL:
            return (f"monotonicity: cumulative target through level {i} "
                    f"({pw:.12g}) exceeds cumulative start ({pa:.12g})")
    need, have = _ball_balance(c)
    if need > have + EQUALITY_RTOL * max(1.0, abs(have)):
        return (f"conservation: target needs {need:.12g} balls per urn, "
                f"only {have:.12g} available")
    return None


def feasibility_check(c: EndpointConstraint) -> Feasibility:
    """Classify an endpoint constraint; see the module docstring."""
    if feasibility_violation(c) is not None:
        return Feasibility.Infeasible
    if c.is_trivial():
        return Feasibility.FeasiblePolynomial
    need, have = _ball_balance(c)
    if abs(need - have) <= EQUALITY_RTOL * max(1.0, abs(have)):
        return Feasibility.FeasiblePolynomial
    if c.omega.overflow <= 1e-12:
        return Feasibility.FeasibleInfiniteRate
    return Feasibility.FeasibleExponential


def _piece(alpha_slice, omega_slice, mass: float, beta_p: float,
           cap_p: int) -> EndpointConstraint:
    a = [x / mass for x in alpha_slice]
    w = [x / mass for x in omega_slice]
    while len(a) < cap_p + 2:
        a.append(0.0)
        w.append(0.0)
    alpha = SimplexVector(a, cap_p, tolerance=1e-9)
    omega = SimplexVector(w, cap_p, tolerance=1e-9)
    if abs(beta_p) <= 1e-12:
        beta_p = 0.0
    return EndpointConstraint(alpha, omega, beta_p)


def irreducible_decompose(c: EndpointConstraint) -> list[DecompositionPiece]:
    """Split a feasible constraint into irreducible standalone pieces.

    Returns DecompositionPiece records (re-indexed constraint, urn
    mass, level offset). The concatenation reproduces the input:
    masses sum to 1, mass-weighted budgets sum to beta, and
    re-offsetting the piece vectors recovers alpha and omega.
    """
    violation = feasibility_violation(c)
    if violation is not None:
        raise InfeasibleInput(violation)
    c, base_offset = c.standardized()
    cap = c.capacity_index
    psi_a, psi_w = c.alpha.psi(), c.omega.psi()
    splits = [i for i in range(cap)
              if abs(psi_a[i] - psi_w[i]) <= _ATOL]

    bands: list[tuple[int, int]] = []   # inclusive level ranges
    lo = 0
    for s in splits:
        bands.append((lo, s))
        lo = s + 1
    bands.append((lo, cap))

    pieces: list[DecompositionPiece] = []
    interior_budget = 0.0
    for lo, hi in bands:
        is_top = (hi == cap)
        a_slice = list(c.alpha.entries[lo:hi + 1])
        w_slice = list(c.omega.entries[lo:hi + 1])
        if is_top:
            a_slice.append(c.alpha.overflow)
            w_slice.append(c.omega.overflow)
        else:
            a_slice.append(0.0)
            w_slice.append(0.0)
        mass = math.fsum(a_slice)
        if mass <= _ATOL:
            raise DegenerateSplit(
                f"band at levels {lo}..{hi} has zero urn mass")
        if is_top:
            beta_p = (c.beta - interior_budget) / mass
            if beta_p < -1e-9:
                raise DomainError(
                    f"negative residual budget {beta_p:.3e} for top band")
            beta_p = max(beta_p, 0.0)
        else:
            mean_a = math.fsum(k * v for k, v in enumerate(a_slice))
            mean_w = math.fsum(k * v for k, v in enumerate(w_slice))
            beta_p = (mean_w - mean_a) / mass
            beta_p = max(beta_p, 0.0)
            interior_budget += beta_p * mass
        piece = _piece(a_slice, w_slice, mass, beta_p, hi - lo)
        pieces.append(DecompositionPiece(piece, mass, base_offset + lo))
    return pieces


def recombine_rates(pieces: list[DecompositionPiece],
                    piece_rates: list[float], beta: float) -> float:
    """Recombine standalone piece rates into the original problem's rate.

    Each standalone rate measures entropy against the Poisson law of
    the piece's own budget beta_p; against the original budget beta
    the exact identity is

        J = sum_p m_p J_p + sum_p m_p beta_p log(beta_p / beta)

    with 0 log 0 = 0. Changing the entropy reference from the piece
    budget to the full budget adds (beta - beta_p) plus
    mean * log(beta_p / beta) per class; the means are pinned to
    beta_p within each piece, and the mass-weighted (beta - beta_p)
    terms sum to zero, leaving only the log correction. Zero-budget
    (trivial) pieces contribute m_p * J_p = 0.
    """
    if len(pieces) != len(piece_rates):
        raise DomainError("pieces and rates must align")
    total = 0.0
    for piece, rate in zip(pieces, piece_rates):
        bp = piece.constraint.beta
        total += piece.urn_mass * rate
        if bp > 0.0:
            total += piece.urn_mass * bp * math.log(bp / beta)
    return total
