"""Closed-form minimizing occupancy paths and their verification.

The least-cost path from an empty start to a target (omega, beta) is
generated by one scalar function, the zero-occupancy curve

    psi0(x) = C e^{-rho x} + sum_{k<=I} p_k (1 - x/beta)^k,
    p_k = omega_k - C P_k(rho beta),

a pure degree-I polynomial when C = 0. Every occupancy level and
throw rate is an explicit derivative of it:

    gamma_i(x) = x^i/i! (-1)^i     psi0^(i)(x)
    theta_i(x) = x^i/i! (-1)^(i+1) psi0^(i+1)(x)

with the overflow entries absorbing the analytic remainder of the
Taylor identity sum_i gamma_i = psi0(0) = 1. Derivatives come from
the coefficient table, never from repeated numerical differentiation.

A general start runs one empty-start path per initial occupancy
level k, on a clock rescaled by that class's share of the balls:
gamma_i(x) = sum_k alpha_k gamma_{k,i-k}(x beta_k / beta). The class
paths reuse the constants of the solved joint minimizer (tilt
rho_k = rho beta / beta_k, scale C_k), so no per-class re-solve
happens here.

Costs are evaluated by the boundary-term identity

    J = beta + sum_i [gamma_i(beta) log|psi0^(i)(beta)|
                      - gamma_i(0) log|psi0^(i)(0)|]

(classwise for general starts, where the per-class budgets add
beta_k log(beta_k/beta) offsets), and every cost returned here is
cross-checked against the relative-entropy route before leaving.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entropy import (poisson_pmf, poisson_tail_mass, poisson_tail_mean,
                      relative_entropy)
from .errors import (BoundaryEvaluation, DomainError, InfeasibleInput,
                     SolverFailure)
from .feasibility import feasibility_check, irreducible_decompose
from .twist import (EmptyTwist, GeneralTwist, TwistCase, minimizer_from_twist,
                    polynomial_extension, solve_empty_twist, solve_general)
from .types import (CountDistribution, EndpointConstraint, Feasibility,
                    OccupancyPathGrid, SimplexVector)

__all__ = [
    "EmptyExtremal",
    "ClassPath",
    "GeneralExtremal",
    "build_empty_extremal",
    "build_general_extremal",
    "el_residual",
    "closed_form_cost",
    "complete_monotone_check",
]

_CLAMP = 1e-12


def _clamped(values, what: str) -> tuple[float, ...]:
    out = []
    for v in values:
        if v < -_CLAMP:
            raise SolverFailure(
                f"{what} entry {v:.3e} below the -1e-12 rounding allowance")
        out.append(v if v > 0.0 else 0.0)
    return tuple(out)


@dataclass(frozen=True)
class EmptyExtremal:
    """Least-cost path from all-empty urns to (omega, beta).

    poly_coeffs holds p_0..p_d of the zero-occupancy curve; the
    working degree d equals capacity_index, or capacity_index + 1
    when a tight-budget target kept mass in its overflow slot (that
    mass then lives at the one reachable extra level). Evaluation
    reports occupancies in the original shape, the extra level
    folded into overflow.
    """

    omega: SimplexVector
    beta: float
    twist: EmptyTwist
    poly_coeffs: tuple[float, ...]
    capacity_index: int

    @property
    def work_degree(self) -> int:
        return len(self.poly_coeffs) - 1

    def alt_derivative(self, i: int, x: float, s: float | None = None) -> float:
        """(-1)^i times the i-th derivative of psi0 at x.

        s = 1 - x/beta may be passed by a caller that knows it more
        accurately than x alone gives (rescaled class clocks).
        """
        if s is None:
            s = 1.0 - x / self.beta
        val = 0.0
        if self.twist.C > 0.0:
            val = self.twist.C * self.twist.rho ** i \
                * math.exp(-self.twist.rho * x)
        d = self.work_degree
        if i <= d:
            acc = 0.0
            for k in range(d, i - 1, -1):
                acc = acc * s + self.poly_coeffs[k] * math.perm(k, i)
            val += acc / self.beta ** i
        return val

    def _heads(self, x: float, s: float) -> tuple[list[float], list[float]]:
        """gamma and theta values at levels 0..work_degree."""
        gam, the = [], []
        fact = 1.0   # x^i / i!
        for i in range(self.work_degree + 1):
            if i > 0:
                fact *= x / i
            gam.append(fact * self.alt_derivative(i, x, s))
            the.append(fact * self.alt_derivative(i + 1, x, s))
        return gam, the

    def _overflows(self, x: float, gam: list[float],
                   the: list[float]) -> tuple[float, float]:
        """Overflow slots of gamma and theta, evaluated analytically.

        Closing them by 1 - sum(head) instead would turn values near
        the floating-point epsilon (x near 0) into pure noise, which
        quadrature and stationarity checks then amplify. The folded
        extra level contributes its own table entry; everything past
        the working degree is the scaled Poisson tail, into which
        throws arrive at rate rho.
        """
        d = self.work_degree
        g = gam[d] if d > self.capacity_index else 0.0
        t = the[d] if d > self.capacity_index else 0.0
        if self.twist.C > 0.0:
            tail = self.twist.C * poisson_tail_mass(d, self.twist.rho * x)
            g += tail
            t += self.twist.rho * tail
        return g, t

    def _check_x(self, x: float) -> float:
        x = float(x)
        if x < 0.0 or x > self.beta * (1.0 + 1e-12):
            raise DomainError(f"x = {x!r} outside [0, {self.beta}]")
        return min(x, self.beta)

    def level_value(self, i: int, x: float) -> float:
        """Occupancy fraction at any single level, however deep.

        Levels beyond the working degree follow the analytic tail
        C P_i(rho x); with C = 0 they are exactly zero.
        """
        x = self._check_x(x)
        if i <= self.work_degree:
            fact = x ** i / math.factorial(i)
            return max(fact * self.alt_derivative(i, x), 0.0)
        if self.twist.C == 0.0:
            return 0.0
        return self.twist.C * poisson_pmf(i, self.twist.rho * x)

    def gamma(self, x: float) -> SimplexVector:
        x = self._check_x(x)
        gam, the = self._heads(x, 1.0 - x / self.beta)
        head = gam[:self.capacity_index + 1]
        over, _ = self._overflows(x, gam, the)
        return SimplexVector(_clamped((*head, over), "occupancy"),
                             self.capacity_index)

    def theta(self, x: float) -> SimplexVector:
        x = self._check_x(x)
        gam, the = self._heads(x, 1.0 - x / self.beta)
        head = the[:self.capacity_index + 1]
        _, over = self._overflows(x, gam, the)
        return SimplexVector(_clamped((*head, over), "throw rate"),
                             self.capacity_index)

    def psi(self, x: float) -> tuple[float, ...]:
        return self.gamma(x).psi()

    def sample(self, n_points: int = 1001) -> OccupancyPathGrid:
        times = np.linspace(0.0, self.beta, n_points)
        states = tuple(self.gamma(float(t)) for t in times)
        return OccupancyPathGrid(tuple(float(t) for t in times), states)


def _materialize_empty(omega: SimplexVector, beta: float, twist: EmptyTwist,
                       capacity_index: int, work_head: tuple[float, ...],
                       tol: float) -> EmptyExtremal:
    rate = twist.rho * beta
    coeffs = tuple(w - twist.C * poisson_pmf(k, rate)
                   for k, w in enumerate(work_head))
    e = EmptyExtremal(omega, beta, twist, coeffs, capacity_index)
    at_zero = e.alt_derivative(0, 0.0)
    slope = e.alt_derivative(1, 0.0)
    if abs(at_zero - 1.0) > tol or abs(slope - 1.0) > tol:
        raise SolverFailure(
            "zero-occupancy curve misses its start: "
            f"value {at_zero!r}, initial rate {slope!r}")
    return e


def build_empty_extremal(omega: SimplexVector, beta: float) -> EmptyExtremal:
    """Construct the least-cost path for an all-empty start."""
    beta = float(beta)
    cap = omega.capacity_index
    start = SimplexVector((1.0,) + (0.0,) * (cap + 1), cap)
    c = EndpointConstraint(start, omega, beta)
    verdict = feasibility_check(c)
    if verdict in (Feasibility.Infeasible, Feasibility.FeasibleInfiniteRate):
        raise InfeasibleInput(f"no finite-rate path exists: {verdict.name}")
    ext = polynomial_extension(c)
    twist = solve_empty_twist(ext.omega, beta)
    return _materialize_empty(omega, beta, twist, cap, ext.omega.head, 1e-10)


@dataclass(frozen=True)
class ClassPath:
    """One initial-occupancy class inside a general-start path."""

    level: int
    weight: float
    budget: float
    path: EmptyExtremal | None   # None when the class receives no balls


@dataclass(frozen=True)
class GeneralExtremal:
    """Least-cost path for a general start, one subpath per class."""

    alpha: SimplexVector
    omega: SimplexVector
    beta: float
    twist: GeneralTwist
    classes: tuple[ClassPath, ...]

    @property
    def capacity_index(self) -> int:
        return self.alpha.capacity_index

    def _check_x(self, x: float) -> float:
        x = float(x)
        if x < 0.0 or x > self.beta * (1.0 + 1e-12):
            raise DomainError(f"x = {x!r} outside [0, {self.beta}]")
        return min(x, self.beta)

    def _accumulate(self, x: float, want_theta: bool) -> SimplexVector:
        cap = self.capacity_index
        s = 1.0 - x / self.beta
        head = [0.0] * (cap + 1)
        over = 0.0
        for cp in self.classes:
            if cp.path is None:
                if not want_theta:
                    head[cp.level] += cp.weight
                continue
            # the class clock runs budget/beta as fast as the ball count
            xk = x * cp.budget / self.beta
            gam, the = cp.path._heads(xk, s)
            vals = the if want_theta else gam
            scale = cp.weight * (cp.budget / self.beta if want_theta else 1.0)
            for j, v in enumerate(vals):
                lev = cp.level + j
                if lev <= cap:
                    head[lev] += scale * v
            # class head levels past the capacity index count as
            # overflow here; the subpath's own overflow (which already
            # includes any folded level) carries the rest
            sub = cp.path._overflows(xk, gam, the)[1 if want_theta else 0]
            for j in range(min(len(vals), cp.path.capacity_index + 1)):
                if cp.level + j > cap:
                    sub += vals[j]
            over += scale * sub
        kind = "throw rate" if want_theta else "occupancy"
        return SimplexVector(_clamped((*head, over), kind), cap)

    def gamma(self, x: float) -> SimplexVector:
        return self._accumulate(self._check_x(x), want_theta=False)

    def theta(self, x: float) -> SimplexVector:
        return self._accumulate(self._check_x(x), want_theta=True)

    def psi(self, x: float) -> tuple[float, ...]:
        return self.gamma(x).psi()

    def sample(self, n_points: int = 1001) -> OccupancyPathGrid:
        times = np.linspace(0.0, self.beta, n_points)
        states = tuple(self.gamma(float(t)) for t in times)
        return OccupancyPathGrid(tuple(float(t) for t in times), states)


def build_general_extremal(c: EndpointConstraint) -> GeneralExtremal:
    """Construct the least-cost path for irreducible constraints.

    Reducible constraints split into independent subproblems whose
    paths do not share a clock; build them per piece instead.
    """
    verdict = feasibility_check(c)
    if verdict in (Feasibility.Infeasible, Feasibility.FeasibleInfiniteRate):
        raise InfeasibleInput(f"no finite-rate path exists: {verdict.name}")
    if c.beta == 0.0 or c.is_trivial():
        raise DomainError("trivial constraint: the path is a single point")
    pieces = irreducible_decompose(c)
    if len(pieces) > 1:
        raise DomainError(
            "reducible constraints have independent subpaths; decompose "
            "first and build one path per piece")
    ext = polynomial_extension(c)
    twist = solve_general(c)
    dists = minimizer_from_twist(ext, twist)
    rate = twist.rho * c.beta

    classes = []
    for k in sorted(dists):
        dist = dists[k]
        budget = dist.mean()
        weight = ext.alpha.head[k]
        if budget <= 1e-12 * max(1.0, c.beta):
            classes.append(ClassPath(k, weight, 0.0, None))
            continue
        sub_cap = ext.capacity_index - k
        sub_over = 1.0 - math.fsum(dist.head)
        sub_omega = SimplexVector(
            _clamped((*dist.head, sub_over), "class target"), sub_cap)
        if twist.case is TwistCase.Exponential:
            # rho_k beta_k = rho beta: the rescaled clock keeps the tilt
            sub_twist = EmptyTwist(rate / budget, twist.class_scales[k],
                                   TwistCase.Exponential)
        else:
            sub_twist = EmptyTwist(1.0, 0.0, TwistCase.Polynomial)
        sub = _materialize_empty(sub_omega, budget, sub_twist, sub_cap,
                                 dist.head, 1e-8)
        classes.append(ClassPath(k, weight, budget, sub))

    g = GeneralExtremal(c.alpha, c.omega, c.beta, twist, tuple(classes))
    total = math.fsum(cp.weight * cp.budget for cp in g.classes)
    if abs(total - c.beta) > 1e-9 * max(1.0, c.beta):
        raise SolverFailure(
            f"class budgets sum to {total!r}, constraint wants {c.beta!r}")
    for have, want, name in ((g.gamma(0.0), c.alpha, "start"),
                             (g.gamma(c.beta), c.omega, "target")):
        err = max(abs(a - b) for a, b in zip(have.entries, want.entries))
        if err > 1e-9:
            raise SolverFailure(f"path misses its {name} by {err:.3e}")
    return g


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals

def _ratio_table(path, xs, cap: int) -> np.ndarray:
    """theta_i/gamma_i for i = 0..cap plus the overflow ratio, per x."""
    out = np.empty((len(xs), cap + 2))
    for row, x in enumerate(xs):
        g = path.gamma(x).entries
        t = path.theta(x).entries
        with np.errstate(divide="ignore", invalid="ignore"):
            out[row] = np.divide(np.asarray(t), np.asarray(g))
    return out


def el_residual(path, x_grid, *, step: float = 1e-5) -> np.ndarray:
    """Pointwise defect of the path in the stationarity equations.

    For each interior grid point and each level i the residual is

        [-r_i + r_{i+1}] - d/dx[-log r_i + log r_over]

    with r_i = theta_i/gamma_i and the derivative taken by central
    differences; paths that never touch overflow drop the r_over
    term and the top equation. Rows index grid points, columns
    equations. Levels a path never occupies yield nan columns.
    """
    beta = path.beta
    cap = (path.capacity_index if hasattr(path, "capacity_index")
           else path.gamma(0.0).capacity_index)
    margin = 1e-4 * beta
    xs = [float(x) for x in x_grid]
    if any(x <= margin or x >= beta - margin for x in xs):
        raise BoundaryEvaluation(
            f"grid must stay inside ({margin!r}, {beta - margin!r})")
    h = min(step, margin / 4.0)

    twist = getattr(path, "twist", None)
    if twist is not None:
        polynomial = twist.case is TwistCase.Polynomial
    else:
        probe = max(max(path.gamma(x).overflow, abs(path.theta(x).overflow))
                    for x in xs)
        polynomial = probe < 1e-12

    r_mid = _ratio_table(path, xs, cap)
    r_lo = _ratio_table(path, [x - h for x in xs], cap)
    r_hi = _ratio_table(path, [x + h for x in xs], cap)

    if polynomial:
        # top active level: throws at it are identically zero
        terminal = path.gamma(beta).entries
        upper = max((i for i in range(cap + 2) if terminal[i] > 1e-12),
                    default=0)
        n_eq = upper
    else:
        n_eq = cap + 1
    if n_eq == 0:
        return np.zeros((len(xs), 0))

    lhs = -r_mid[:, :n_eq] + r_mid[:, 1:n_eq + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lo = -np.log(r_lo[:, :n_eq])
        log_hi = -np.log(r_hi[:, :n_eq])
        if not polynomial:
            log_lo += np.log(r_lo[:, -1])[:, None]
            log_hi += np.log(r_hi[:, -1])[:, None]
    rhs = (log_hi - log_lo) / (2.0 * h)
    return np.abs(lhs - rhs)


# ---------------------------------------------------------------------------
# cost identities

def _empty_boundary_cost(e: EmptyExtremal) -> float:
    """Boundary-term cost of an empty-start path, own-budget scale."""
    beta = e.beta
    total = beta
    gam, _ = e._heads(beta, 0.0)
    for i, g in enumerate(gam):
        if g > 0.0:
            total += g * math.log(e.alt_derivative(i, beta, 0.0))
    if e.twist.case is TwistCase.Exponential:
        rho, c0 = e.twist.rho, e.twist.C
        rate = rho * beta
        d = e.work_degree
        tail = poisson_tail_mass(d, rate)
        tail_mean = poisson_tail_mean(d, rate)
        total += c0 * ((math.log(c0) - rate) * tail
                       + math.log(rho) * tail_mean)
    # the gamma_i(0) log terms all vanish: level 0 has log psi0(0) = 0
    return total


def _empty_terminal_distribution(e: EmptyExtremal) -> CountDistribution:
    gam, _ = e._heads(e.beta, 0.0)
    head = _clamped(gam, "terminal occupancy")
    if e.twist.case is TwistCase.Exponential:
        return CountDistribution(head, e.twist.C, e.twist.rho * e.beta,
                                 mass_tolerance=1e-8)
    return CountDistribution(head, 0.0, max(e.beta, 1.0),
                             mass_tolerance=1e-8)


def closed_form_cost(e) -> float:
    """Cost of a constructed path by the boundary-term identity.

    Cross-checks the value against the relative-entropy route
    (terminal distribution against the free Poisson law) and raises
    SolverFailure if the two disagree beyond 1e-8.
    """
    if isinstance(e, EmptyExtremal):
        boundary = _empty_boundary_cost(e)
        entropy = relative_entropy(_empty_terminal_distribution(e),
                                   CountDistribution.poisson(e.beta))
    elif isinstance(e, GeneralExtremal):
        parts = [e.beta]
        entropy = 0.0
        reference = CountDistribution.poisson(e.beta)
        for cp in e.classes:
            if cp.path is None:
                # point mass at zero added balls: only the free
                # reference mass at 0 is paid for
                parts.append(cp.weight * 0.0)
                entropy += cp.weight * relative_entropy(
                    CountDistribution((1.0,), 0.0, 1.0), reference)
                continue
            sub = _empty_boundary_cost(cp.path)
            parts.append(cp.weight * (sub - cp.budget
                                      + cp.budget * math.log(cp.budget
                                                             / e.beta)))
            entropy += cp.weight * relative_entropy(
                _empty_terminal_distribution(cp.path), reference)
        boundary = math.fsum(parts)
    else:
        raise DomainError(f"not a constructed path: {type(e).__name__}")
    if abs(boundary - entropy) > 1e-8:
        raise SolverFailure(
            "cost routes disagree: boundary terms give "
            f"{boundary!r}, relative entropy gives {entropy!r}")
    return boundary


# ---------------------------------------------------------------------------
# complete monotonicity

def complete_monotone_check(e, grid) -> bool:
    """Strict alternating-derivative positivity of the generator.

    Checks (-1)^i psi0^(i)(x) > 0 on grid points up to beta times
    (1 - 1e-4), for i up to the working degree plus, for paths with
    an exponential part, three further orders. General-start paths
    are checked classwise.
    """
    if isinstance(e, GeneralExtremal):
        return all(complete_monotone_check(cp.path, grid)
                   for cp in e.classes if cp.path is not None)
    limit = e.beta * (1.0 - 1e-4)
    xs = [float(x) for x in grid if 0.0 <= float(x) <= limit]
    extra = 3 if e.twist.C > 0.0 else 0
    for i in range(e.work_degree + 1 + extra):
        for x in xs:
            if not e.alt_derivative(i, x) > 0.0:
                return False
    return True
