"""Tilted-family solvers for terminal occupancy rates.

The minimal relative entropy D(pi || Poisson(beta)) over count
distributions meeting endpoint and conservation constraints is
attained in an explicit exponential family ("twisted" Poisson laws).
This module solves for the family parameters and evaluates rates and
minimizers, for the empty start (all urns at level 0) and for general
initial occupancies.

Two regimes, decided by feasibility_check:
  exponential - conservation is slack, the target keeps an overflow
    bucket; the minimizer has a Poisson(rho * beta) tail scaled by C
    (empty case) or per-class constants C_k with level weights W_i;
  polynomial - conservation is tight; the minimizer has bounded
    support, no tilt (rho = 1, C = 0), and per-class constants D_k
    with one gauge freedom (W at the top occupied level is pinned
    to 1 and its endpoint equation dropped, being the sum of the
    class normalizations minus the other endpoint equations).

A tight-conservation target that still has overflow mass is first
re-expressed one level higher, where its overflow bucket is empty
(polynomial_extension).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .entropy import (poisson_log_pmf, poisson_pmf, poisson_tail_mass,
                      poisson_tail_mean)
from .errors import (BracketFailure, DomainError, InfeasibleInput,
                     NewtonDivergence, SolverFailure)
from .feasibility import feasibility_check, irreducible_decompose, \
    recombine_rates
from .types import (CountDistribution, EndpointConstraint, Feasibility,
                    SimplexVector)

__all__ = [
    "TwistCase", "EmptyTwist", "GeneralTwist",
    "solve_rho_empty", "compute_C_empty", "solve_empty_twist",
    "terminal_rate_empty", "minimizer_empty",
    "solve_general", "terminal_rate_general", "minimizer_general",
    "polynomial_extension", "rate_from_twist", "minimizer_from_twist",
    "conditional_tail_mean",
]


class TwistCase(enum.Enum):
    Exponential = "exponential"
    Polynomial = "polynomial"


@dataclass(frozen=True)
class EmptyTwist:
    """Tilt rho and tail normalizer C for the empty-start minimizer."""

    rho: float
    C: float
    case: TwistCase


@dataclass(frozen=True)
class GeneralTwist:
    """Family constants for a general-start minimizer.

    class_scales maps initial level k to C_k (exponential) or D_k
    (polynomial); endpoint_weights maps occupied target level i to
    W_i. Indices refer to polynomial_extension(c) of the constraint
    the twist was solved for. rho is 1 in the polynomial case.
    """

    rho: float
    class_scales: dict[int, float]
    endpoint_weights: dict[int, float]
    case: TwistCase


def _empty_start(capacity_index: int) -> SimplexVector:
    return SimplexVector((1.0,) + (0.0,) * (capacity_index + 1),
                         capacity_index)


def conditional_tail_mean(capacity_index: int, rate: float) -> float:
    """E[Y | Y > capacity_index] for Y ~ Poisson(rate)."""
    mass = poisson_tail_mass(capacity_index, rate)
    if mass <= 0.0:
        # rate so small the tail underflows; the limit is I + 1
        return float(capacity_index + 1)
    return poisson_tail_mean(capacity_index, rate) / mass


def polynomial_extension(c: EndpointConstraint) -> EndpointConstraint:
    """Move a tight-conservation target's overflow mass into a new level.

    Under conservation equality the overflow bucket holds urns with
    exactly I + 1 balls (any more would break the ball budget), so
    the constraint is re-expressed at capacity I + 1 with an empty
    overflow bucket. Identity for everything else.
    """
    if c.omega.overflow <= 1e-12:
        return c
    if feasibility_check(c) is not Feasibility.FeasiblePolynomial:
        return c
    cap = c.capacity_index
    alpha = SimplexVector(c.alpha.entries + (0.0,), cap + 1)
    omega = SimplexVector(c.omega.head + (c.omega.overflow, 0.0), cap + 1)
    return EndpointConstraint(alpha, omega, c.beta)


# ---------------------------------------------------------------------------
# empty start


def _head_sums(omega: SimplexVector) -> tuple[float, float]:
    s0 = math.fsum(omega.head)
    s1 = math.fsum(i * w for i, w in enumerate(omega.head))
    return s0, s1


def solve_rho_empty(omega: SimplexVector, beta: float) -> float:
    """Tilt rho for an empty start: match the conditional tail mean.

    The map rho -> E[Y | Y > I] of Poisson(rho * beta) increases
    strictly from I + 1 to infinity, so the target mean
    (beta - sum i w_i) / (1 - sum w_i) has exactly one preimage.
    Bracket by doubling, bisect, then Newton-polish.
    """
    cap = omega.capacity_index
    s0, s1 = _head_sums(omega)
    den = 1.0 - s0
    if den <= 0.0 or beta <= 0.0:
        raise BracketFailure("tilt equation needs overflow mass and beta > 0")
    mu = (beta - s1) / den
    if mu <= cap + 1:
        raise BracketFailure(
            f"target conditional mean {mu:.6g} at or below {cap + 1}; "
            "not an exponential-case input")

    def f(rho: float) -> float:
        return conditional_tail_mean(cap, rho * beta) - mu

    lo, hi = 1e-8, 1.0
    flo = f(lo)
    if flo > 0.0:
        raise BracketFailure("conditional mean above target at rho = 1e-8")
    fhi = f(hi)
    doublings = 0
    while fhi < 0.0:
        hi *= 2.0
        fhi = f(hi)
        doublings += 1
        if doublings > 200:
            raise BracketFailure("no sign change while doubling rho")
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if f(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-12 * hi:
            break
    rho = 0.5 * (lo + hi)
    scale = max(1.0, abs(mu))
    for _ in range(8):
        val = f(rho)
        if abs(val) < 1e-13 * scale:
            break
        h = 1e-7 * max(rho, 1.0)
        slope = (f(rho + h) - f(rho - h)) / (2.0 * h)
        if slope <= 0.0:
            break
        step = val / slope
        cand = rho - step
        if not (lo <= cand <= hi):
            cand = min(max(cand, lo), hi)
        rho = cand
    if abs(f(rho)) > 1e-12 * scale:
        raise SolverFailure("tilt equation residual above 1e-12",
                            residual=abs(f(rho)))
    return rho


def compute_C_empty(omega: SimplexVector, beta: float, rho: float) -> float:
    """Tail normalizer C, with the two defining forms cross-checked.

    Mass form: (1 - sum w_i) / P(Y > I); mean form:
    (beta - sum i w_i) / E[Y; Y > I], Y ~ Poisson(rho * beta). They
    must agree to 1e-9 relative; a polynomial-case target (both
    numerators zero) gives C = 0.
    """
    cap = omega.capacity_index
    s0, s1 = _head_sums(omega)
    if abs(1.0 - s0) <= 1e-12:
        return 0.0
    c_mass = (1.0 - s0) / poisson_tail_mass(cap, rho * beta)
    c_mean = (beta - s1) / poisson_tail_mean(cap, rho * beta)
    gap = abs(c_mass - c_mean)
    if gap > 1e-9 * max(1.0, abs(c_mass)):
        raise SolverFailure(
            "the two tail-normalizer expressions disagree",
            residual=gap)
    return c_mass


def solve_empty_twist(omega: SimplexVector, beta: float) -> EmptyTwist:
    """(rho, C, case) for a feasible finite-rate empty-start target."""
    cap = omega.capacity_index
    c = EndpointConstraint(_empty_start(cap), omega, beta)
    verdict = feasibility_check(c)
    if verdict is Feasibility.FeasiblePolynomial:
        return EmptyTwist(1.0, 0.0, TwistCase.Polynomial)
    if verdict is not Feasibility.FeasibleExponential:
        raise InfeasibleInput(f"no finite-rate minimizer: {verdict.name}")
    rho = solve_rho_empty(omega, beta)
    return EmptyTwist(rho, compute_C_empty(omega, beta, rho),
                      TwistCase.Exponential)


def _poly_head_entries(omega: SimplexVector) -> tuple[float, ...]:
    """Head of a tight-conservation target, overflow folded in."""
    if omega.overflow > 1e-12:
        return omega.head + (omega.overflow,)
    return omega.head


def terminal_rate_empty(omega: SimplexVector, beta: float) -> float:
    """Minimal relative entropy to Poisson(beta) with pinned head.

    Exponential case: head terms plus the closed-form tail
    contribution (1 - sum w_i)(log C + (1 - rho) beta)
    + (beta - sum i w_i) log rho. Polynomial case: head terms only.
    Infeasible targets (and feasible ones whose every path has
    infinite cost) give +inf.
    """
    c = EndpointConstraint(_empty_start(omega.capacity_index), omega, beta)
    verdict = feasibility_check(c)
    if verdict in (Feasibility.Infeasible, Feasibility.FeasibleInfiniteRate):
        return math.inf
    if verdict is Feasibility.FeasiblePolynomial:
        head = _poly_head_entries(omega)
        return math.fsum(
            w * (math.log(w) - poisson_log_pmf(i, beta))
            for i, w in enumerate(head) if w > 0.0)
    rho = solve_rho_empty(omega, beta)
    cnorm = compute_C_empty(omega, beta, rho)
    s0, s1 = _head_sums(omega)
    head_cost = math.fsum(
        w * (math.log(w) - poisson_log_pmf(i, beta))
        for i, w in enumerate(omega.head) if w > 0.0)
    return (head_cost + (1.0 - s0) * (math.log(cnorm) + (1.0 - rho) * beta)
            + (beta - s1) * math.log(rho))


def minimizer_empty(omega: SimplexVector, beta: float) -> CountDistribution:
    """The unique minimizing count distribution for an empty start."""
    twist = solve_empty_twist(omega, beta)
    if twist.case is TwistCase.Polynomial:
        head = _poly_head_entries(omega)
        return CountDistribution(head, 0.0, beta if beta > 0 else 1.0,
                                 mass_tolerance=1e-8)
    return CountDistribution(omega.head, twist.C, twist.rho * beta,
                             mass_tolerance=1e-8)


# ---------------------------------------------------------------------------
# general start


def _required_classes(c: EndpointConstraint) -> list[int]:
    if c.alpha.overflow > 1e-12:
        raise DomainError("initial overflow urns are not supported; "
                          "extend the capacity index instead")
    return [k for k, a in enumerate(c.alpha.head) if a > 0.0]


def _support_levels(omega: SimplexVector) -> list[int]:
    return [i for i, w in enumerate(omega.head) if w > 0.0]


class _GeneralSystem:
    """Square log-space residual system for the multi-class solver."""

    def __init__(self, c: EndpointConstraint, case: TwistCase):
        self.c = c
        self.case = case
        self.cap = c.capacity_index
        self.classes = _required_classes(c)
        self.levels = _support_levels(c.omega)
        self.alpha = c.alpha.head
        self.omega = c.omega.head
        self.beta = c.beta
        if case is TwistCase.Polynomial:
            self.pinned = self.levels[-1]
            self.free_levels = self.levels[:-1]
        else:
            self.pinned = None
            self.free_levels = self.levels

    @property
    def size(self) -> int:
        n = len(self.classes) + len(self.free_levels)
        return n + (1 if self.case is TwistCase.Exponential else 0)

    def unpack(self, x: np.ndarray):
        pos = 0
        if self.case is TwistCase.Exponential:
            rho = math.exp(x[0])
            pos = 1
        else:
            rho = 1.0
        scales = {k: math.exp(x[pos + j])
                  for j, k in enumerate(self.classes)}
        pos += len(self.classes)
        weights = {i: math.exp(x[pos + j])
                   for j, i in enumerate(self.free_levels)}
        if self.pinned is not None:
            weights[self.pinned] = 1.0
        return rho, scales, weights

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.size)

    def informed_point(self) -> np.ndarray:
        """Start from the empty-style guess: rho = 1, unit scales,
        W_i matching the endpoint equations at that point."""
        x = np.zeros(self.size)
        pos = 1 if self.case is TwistCase.Exponential else 0
        pos += len(self.classes)
        rate = self.beta
        for j, i in enumerate(self.free_levels):
            denom = math.fsum(
                self.alpha[k] * poisson_pmf(i - k, rate)
                for k in self.classes if k <= i)
            if denom > 0.0 and self.omega[i] > 0.0:
                x[pos + j] = math.log(self.omega[i] / denom)
        return x

    def residual(self, x: np.ndarray) -> np.ndarray:
        try:
            return self._residual(x)
        except (OverflowError, ValueError):
            # a wild line-search candidate left the floating-point
            # range; report it as infinitely bad so the step backs off
            return np.full(self.size, math.inf)

    def _residual(self, x: np.ndarray) -> np.ndarray:
        rho, scales, weights = self.unpack(x)
        rate = rho * self.beta
        out = []
        if self.case is TwistCase.Exponential:
            total_mean = 0.0
            for k in self.classes:
                head = math.fsum(
                    poisson_pmf(j, rate) * weights.get(k + j, 0.0)
                    for j in range(self.cap - k + 1))
                mass = scales[k] * (head + poisson_tail_mass(
                    self.cap - k, rate))
                out.append(math.log(mass))
                mean_k = scales[k] * (math.fsum(
                    j * poisson_pmf(j, rate) * weights.get(k + j, 0.0)
                    for j in range(self.cap - k + 1))
                    + poisson_tail_mean(self.cap - k, rate))
                total_mean += self.alpha[k] * mean_k
            for i in self.free_levels:
                model = weights[i] * math.fsum(
                    self.alpha[k] * scales[k] * poisson_pmf(i - k, rate)
                    for k in self.classes if k <= i)
                out.append(math.log(model) - math.log(self.omega[i]))
            out.insert(0, math.log(total_mean) - math.log(self.beta))
        else:
            for k in self.classes:
                mass = scales[k] * math.fsum(
                    poisson_pmf(j, self.beta) * weights.get(k + j, 0.0)
                    for j in range(self.cap - k + 1))
                out.append(math.log(mass) if mass > 0 else 800.0)
            for i in self.free_levels:
                model = weights[i] * math.fsum(
                    self.alpha[k] * scales[k] * poisson_pmf(i - k, self.beta)
                    for k in self.classes if k <= i)
                out.append(math.log(model) - math.log(self.omega[i]))
        return np.array(out)


def _newton(system: _GeneralSystem, x0: np.ndarray,
            max_iter: int = 200) -> tuple[np.ndarray, float]:
    x = x0.copy()
    fx = system.residual(x)
    norm = float(np.abs(fx).max())
    for _ in range(max_iter):
        if norm < 1e-12:
            break
        n = len(x)
        jac = np.empty((n, n))
        h = 1e-7
        for j in range(n):
            xp = x.copy()
            xp[j] += h
            jac[:, j] = (system.residual(xp) - fx) / h
        try:
            step = np.linalg.solve(jac, fx)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        lam = 1.0
        improved = False
        for _ in range(40):
            cand = x - lam * step
            fc = system.residual(cand)
            cn = float(np.abs(fc).max())
            if math.isfinite(cn) and cn < norm:
                x, fx, norm = cand, fc, cn
                improved = True
                break
            lam *= 0.5
        if not improved:
            break
    return x, norm


def solve_general(c: EndpointConstraint) -> GeneralTwist:
    """Family constants for a feasible irreducible constraint.

    Square system in (log rho, log C_k, log W_i) [exponential] or
    (log D_k, log W_i with the top level pinned) [polynomial],
    solved by damped Newton with a finite-difference Jacobian from
    the zero-cost start, then an endpoint-informed start, then
    random restarts. A single initial class reduces in closed form
    to the empty-start solver.
    """
    verdict = feasibility_check(c)
    if verdict is Feasibility.Infeasible:
        raise InfeasibleInput("constraint is infeasible")
    if verdict is Feasibility.FeasibleInfiniteRate:
        raise InfeasibleInput(
            "every admissible path has infinite cost; no minimizer")
    c = polynomial_extension(c)
    case = (TwistCase.Polynomial
            if verdict is Feasibility.FeasiblePolynomial
            else TwistCase.Exponential)
    classes = _required_classes(c)
    levels = _support_levels(c.omega)

    if classes == [0]:
        if case is TwistCase.Exponential:
            rho = solve_rho_empty(c.omega, c.beta)
            cnorm = compute_C_empty(c.omega, c.beta, rho)
            weights = {i: c.omega.head[i]
                       / (cnorm * poisson_pmf(i, rho * c.beta))
                       for i in levels}
            return GeneralTwist(rho, {0: cnorm}, weights, case)
        top = levels[-1]
        d0 = c.omega.head[top] / poisson_pmf(top, c.beta)
        weights = {i: c.omega.head[i] / (d0 * poisson_pmf(i, c.beta))
                   for i in levels}
        return GeneralTwist(1.0, {0: d0}, weights, case)

    system = _GeneralSystem(c, case)
    starts = [system.initial_point(), system.informed_point()]
    rng = np.random.default_rng(0)
    for _ in range(5):
        starts.append(system.informed_point()
                      + rng.normal(scale=0.5, size=system.size))
    best = math.inf
    best_x = starts[0]
    for x0 in starts:
        x, norm = _newton(system, x0)
        if math.isfinite(norm) and norm < best:
            best = norm
            best_x = x
        if norm < 1e-12:
            break
    rho, scales, weights = system.unpack(best_x)
    twist = GeneralTwist(rho, scales, weights, case)
    raw = _raw_residual(c, twist)
    if raw > 1e-10:
        raise NewtonDivergence(
            f"general solver stalled at constraint residual {raw:.3e}",
            best_residual=raw)
    return twist


def _class_head(c: EndpointConstraint, twist: GeneralTwist,
                k: int) -> list[float]:
    rate = twist.rho * c.beta
    scale = twist.class_scales[k]
    head = []
    for j in range(c.capacity_index - k + 1):
        w = twist.endpoint_weights.get(k + j, 0.0)
        head.append(scale * poisson_pmf(j, rate) * w if w > 0.0 else 0.0)
    return head


def _raw_residual(c: EndpointConstraint, twist: GeneralTwist) -> float:
    """Max violation of masses, endpoints, and conservation."""
    rate = twist.rho * c.beta
    worst = 0.0
    total_mean = 0.0
    for k in twist.class_scales:
        head = _class_head(c, twist, k)
        mass = math.fsum(head)
        mean = math.fsum(j * p for j, p in enumerate(head))
        if twist.case is TwistCase.Exponential:
            mass += twist.class_scales[k] * poisson_tail_mass(
                c.capacity_index - k, rate)
            mean += twist.class_scales[k] * poisson_tail_mean(
                c.capacity_index - k, rate)
        worst = max(worst, abs(mass - 1.0))
        total_mean += c.alpha.head[k] * mean
    worst = max(worst, abs(total_mean - c.beta))
    for i, w in enumerate(c.omega.head):
        if w <= 0.0:
            continue
        model = math.fsum(
            c.alpha.head[k] * twist.class_scales[k]
            * poisson_pmf(i - k, rate) * twist.endpoint_weights[i]
            for k in twist.class_scales if k <= i)
        worst = max(worst, abs(model - w))
    return worst


def minimizer_from_twist(c: EndpointConstraint,
                         twist: GeneralTwist) -> dict[int, CountDistribution]:
    """Per-class count distributions encoded by a solved twist."""
    out = {}
    rate = twist.rho * c.beta
    for k in twist.class_scales:
        head = _class_head(c, twist, k)
        if twist.case is TwistCase.Exponential:
            dist = CountDistribution(tuple(head), twist.class_scales[k],
                                     rate, mass_tolerance=1e-8)
        else:
            dist = CountDistribution(tuple(head), 0.0,
                                     c.beta if c.beta > 0 else 1.0,
                                     mass_tolerance=1e-8)
        out[k] = dist
    return out


def rate_from_twist(c: EndpointConstraint, twist: GeneralTwist) -> float:
    """Closed-form rate of a solved constraint (reference Poisson(beta)).

    Exponential: sum_k a_k log C_k + beta (1 - rho) + beta log rho
    + sum_i w_i log W_i. Polynomial: sum_k a_k log D_k
    + sum_i w_i log W_i.
    """
    val = math.fsum(c.alpha.head[k] * math.log(s)
                    for k, s in twist.class_scales.items())
    val += math.fsum(c.omega.head[i] * math.log(w)
                     for i, w in twist.endpoint_weights.items())
    if twist.case is TwistCase.Exponential:
        val += c.beta * (1.0 - twist.rho) + c.beta * math.log(twist.rho)
    return val


def terminal_rate_general(c: EndpointConstraint) -> float:
    """Minimal rate over all valid paths meeting the constraint.

    Decomposes at tight cumulative levels, solves each irreducible
    piece, and recombines: piece rates are measured against their
    own ball budgets, so mass-weighted budget-change terms
    beta_p log(beta_p / beta) are added back.
    """
    verdict = feasibility_check(c)
    if verdict in (Feasibility.Infeasible, Feasibility.FeasibleInfiniteRate):
        return math.inf
    if c.beta == 0.0:
        return 0.0
    pieces = irreducible_decompose(c)
    rates = []
    for piece in pieces:
        sub = piece.constraint
        if sub.is_trivial():
            rates.append(0.0)
        else:
            rates.append(rate_from_twist(polynomial_extension(sub),
                                         solve_general(sub)))
    return recombine_rates(pieces, rates, c.beta)


def minimizer_general(c: EndpointConstraint) -> dict[int, CountDistribution]:
    """Per-class minimizing count distributions for the full problem.

    Classes are indexed by original levels; reducible constraints
    are assembled blockwise from their irreducible pieces (the added
    -ball distribution of a class is unchanged by re-indexing).
    """
    verdict = feasibility_check(c)
    if verdict in (Feasibility.Infeasible, Feasibility.FeasibleInfiniteRate):
        raise InfeasibleInput(f"no finite-rate minimizer: {verdict.name}")
    out: dict[int, CountDistribution] = {}
    if c.beta == 0.0:
        for k, a in enumerate(c.alpha.head):
            if a > 0.0:
                out[k] = CountDistribution((1.0,), 0.0, 1.0)
        return out
    for piece in irreducible_decompose(c):
        sub = piece.constraint
        if sub.is_trivial():
            local = {k: CountDistribution((1.0,), 0.0, 1.0)
                     for k, a in enumerate(sub.alpha.head) if a > 0.0}
        else:
            ext = polynomial_extension(sub)
            local = minimizer_from_twist(ext, solve_general(sub))
        for k, dist in local.items():
            out[piece.level_offset + k] = dist
    return out
