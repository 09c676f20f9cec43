"""Worked rate problems built on the twist machinery.

Three terminal events get dedicated solvers with their own reduced
equation systems:

  * classical_rate  -- an atypical fraction of empty urns,
  * overflow_rate   -- an atypical amount of overflow (balls landing in
                       urns that already hold the capacity count),
  * coupon_rate     -- an atypically small fraction of low-occupancy
                       urns, start levels mixed over several classes.

terminal_set_rate recognises a single linear inequality on the terminal
occupancies and routes it to whichever of those systems applies.  All
solvers return the tilted count distribution behind the exponent, so the
conditioned terminal occupancies are always reconstructable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from .entropy import (poisson_head_mass, poisson_pmf, poisson_tail_mass,
                      poisson_tail_mean, relative_entropy)
from .errors import (BracketFailure, DomainError, InfeasibleInput,
                     SolverFailure, UnsupportedConstraintFamily)
from .extremal import EmptyExtremal, build_empty_extremal
from .paths import zero_cost_path
from .twist import terminal_rate_empty
from .types import CountDistribution, SimplexVector

__all__ = [
    "ClassicalSolution",
    "OverflowSolution",
    "CouponSolution",
    "LinearTerminalConstraint",
    "classical_rate",
    "overflow_rate",
    "coupon_rate",
    "terminal_set_rate",
]

_BRENTQ_RTOL = 1e-15


# ---------------------------------------------------------------------------
# empty-urn fraction


@dataclass(frozen=True)
class ClassicalSolution:
    """Decay rate for an atypical empty-urn fraction omega0.

    Unpacks as (rho, C, rate).  The conditioned terminal path is a
    capacity-0 extremal; level_curve(i, x) evaluates the occupancy
    fraction of any level i along it, gamma_0 via the generator head
    and deeper levels via the scaled Poisson tail C*P_i(rho*x).
    """

    omega0: float
    beta: float
    rho: float
    C: float
    rate: float
    path: EmptyExtremal

    def __iter__(self):
        return iter((self.rho, self.C, self.rate))

    def level_curve(self, i: int, x: float) -> float:
        return self.path.level_value(i, x)

    def residuals(self) -> dict[str, float]:
        if self.rho == 0.0:
            # degenerate tight budget; nothing was solved numerically
            return {"tilt_equation": 0.0, "normalization": 0.0}
        tilt = (self.rho * (1.0 - self.omega0) - 1.0
                + math.exp(-self.beta * self.rho))
        return {"tilt_equation": tilt, "normalization": self.rho * self.C - 1.0}


def classical_rate(omega0: float, beta: float) -> ClassicalSolution:
    """Rate for the event "a fraction omega0 of the urns stays empty".

    rho solves rho*(1 - omega0) = 1 - exp(-beta*rho); C = 1/rho.  The
    tilted count law is omega0 at zero and C*P_i(rho*beta) above, and
    the rate is its divergence from Poisson(beta).
    """
    omega0 = float(omega0)
    beta = float(beta)
    if not (0.0 < omega0 < 1.0) or not math.isfinite(omega0):
        raise DomainError(f"omega0 must lie strictly in (0, 1), got {omega0!r}")
    if not beta > 0.0 or not math.isfinite(beta):
        raise DomainError(f"beta must be positive and finite, got {beta!r}")

    omega = SimplexVector((omega0, 1.0 - omega0), 0)
    slack = beta - (1.0 - omega0)
    if slack < -1e-12 * max(1.0, beta):
        raise InfeasibleInput(
            f"every nonempty urn needs at least one ball: demand "
            f"{1.0 - omega0:.6g} exceeds the budget {beta:.6g}")

    if slack <= 1e-12 * max(1.0, beta):
        # ball budget exactly matches the nonempty demand; the tilt
        # degenerates (rho -> 0, C -> inf) but the rate stays finite
        rate = terminal_rate_empty(omega, beta)
        path = build_empty_extremal(omega, beta)
        return ClassicalSolution(omega0, beta, 0.0, math.inf, rate, path)

    def f(rho: float) -> float:
        return rho * (1.0 - omega0) - 1.0 + math.exp(-beta * rho)

    # f(0) = 0 always; the positive root exists because f'(0) < 0 here
    lo = 1e-12
    hi = 2.0
    for _ in range(200):
        if f(hi) > 0.0:
            break
        hi *= 2.0
    else:
        raise BracketFailure("no upper bracket for the empty-urn tilt")
    rho = float(brentq(f, lo, hi, xtol=1e-15, rtol=_BRENTQ_RTOL, maxiter=200))
    scale = 1.0 / rho

    rate = (omega0 * (math.log(omega0) + beta)
            + (1.0 - omega0) * (math.log(scale) + (1.0 - rho) * beta)
            + beta * math.log(rho))

    # independent route through the generic capacity-I solver
    generic = terminal_rate_empty(omega, beta)
    if abs(rate - generic) > 1e-10 * max(1.0, abs(rate)):
        raise SolverFailure(
            f"empty-urn closed form {rate!r} disagrees with the generic "
            f"terminal rate {generic!r}")

    path = build_empty_extremal(omega, beta)
    if abs(path.twist.rho - rho) > 1e-9 * max(1.0, rho):
        raise SolverFailure(
            f"path tilt {path.twist.rho!r} drifted from the scalar root {rho!r}")
    return ClassicalSolution(omega0, beta, rho, scale, rate, path)


# ---------------------------------------------------------------------------
# overflow


@dataclass(frozen=True)
class OverflowSolution:
    """Tilt data for an atypically large (or small) overflow fraction.

    zeta is the average spare capacity per urn demanded at the end,
    zeta = eta + I - beta.  The tilted count law is conditionally
    Poisson(rho*beta/nu) below the capacity index and Poisson(rho*beta)
    above it, glued with the normaliser C.
    """

    capacity_index: int
    beta: float
    eta: float
    zeta: float
    rho: float
    nu: float
    C: float
    J_O: float

    def terminal_distribution(self) -> CountDistribution:
        rate = self.rho * self.beta
        i_cap = self.capacity_index
        head = tuple(self.C * poisson_pmf(i, rate) * self.nu ** (i_cap - i)
                     for i in range(i_cap + 1))
        return CountDistribution(head, self.C, rate, mass_tolerance=1e-8)

    def terminal_occupancy(self) -> SimplexVector:
        dist = self.terminal_distribution()
        head = tuple(dist.pmf(i) for i in range(self.capacity_index + 1))
        over = max(1.0 - math.fsum(head), 0.0)
        return SimplexVector((*head, over), self.capacity_index)

    def residuals(self) -> dict[str, float]:
        rate = self.rho * self.beta
        q = _overflow_q(self.capacity_index, rate)
        r = _overflow_r(self.capacity_index, rate, self.nu)
        i_cap = self.capacity_index
        return {
            "normalization": self.C * (r + q) - 1.0,
            "conservation": (self.C * ((rate / self.nu) * r + rate * q)
                             - self.beta) / max(1.0, self.beta),
            "spare_capacity": (self.C * (i_cap * poisson_pmf(i_cap, rate)
                                         + (i_cap - rate / self.nu) * r)
                               - self.zeta) / max(1.0, self.zeta),
        }


def _overflow_q(i_cap: int, rate: float) -> float:
    # P(Y >= I) for Y ~ Poisson(rate)
    return poisson_tail_mass(i_cap - 1, rate)


def _overflow_r(i_cap: int, rate: float, nu: float) -> float:
    # sum_{i<I} P_i(rate) nu^{I-i}, evaluated in log space
    head = poisson_head_mass(i_cap - 1, rate / nu)
    if head <= 0.0:
        return 0.0
    return math.exp(i_cap * math.log(nu) - rate * (1.0 - 1.0 / nu)
                    + math.log(head))


def _overflow_equations(i_cap: int, beta: float, zeta: float,
                        rho: float, nu: float) -> tuple[float, float]:
    rate = rho * beta
    q = _overflow_q(i_cap, rate)
    r = _overflow_r(i_cap, rate, nu)
    g1 = (rho / nu - 1.0) * r + (rho - 1.0) * q
    g2 = (i_cap - rate / nu - zeta) * r - zeta * q \
        + i_cap * poisson_pmf(i_cap, rate)
    return g1, g2


def _overflow_nu(i_cap: int, beta: float, rho: float) -> float:
    """Root of the first reduced equation at fixed rho.

    For rho > 1 the equation is positive at nu = rho and strictly
    decreasing beyond it, so the root is bracketed by doubling; for
    rho < 1 the root sits below rho and is found by halving.
    """
    if abs(rho - 1.0) <= 1e-14:
        return 1.0
    rate = rho * beta
    q = _overflow_q(i_cap, rate)

    def g1(nu: float) -> float:
        r = _overflow_r(i_cap, rate, nu)
        return (rho / nu - 1.0) * r + (rho - 1.0) * q

    if rho > 1.0:
        lo = rho
        hi = 2.0 * rho
        for _ in range(300):
            if g1(hi) < 0.0:
                break
            hi *= 2.0
        else:
            raise BracketFailure(
                "no upper bracket for the within-capacity twist nu")
        return float(brentq(g1, lo, hi, xtol=1e-14, rtol=_BRENTQ_RTOL,
                            maxiter=200))

    # nu -> 0 limit of g1 decides whether a root exists at all
    if rho * poisson_pmf(i_cap - 1, rate) + (rho - 1.0) * q <= 0.0:
        raise BracketFailure(
            f"the within-capacity twist equation has no root at rho = {rho!r}")
    hi = rho
    lo = 0.5 * rho
    for _ in range(1100):
        if g1(lo) > 0.0:
            break
        lo *= 0.5
        if lo < 1e-250:
            raise BracketFailure(
                "within-capacity twist bracket collapsed toward nu = 0")
    else:
        raise BracketFailure(
            "no lower bracket for the within-capacity twist nu")
    return float(brentq(g1, lo, hi, xtol=1e-14, rtol=_BRENTQ_RTOL,
                        maxiter=200))


def _overflow_polish(i_cap: int, beta: float, zeta: float,
                     rho: float, nu: float) -> tuple[float, float]:
    """Damped two-variable Newton refinement of the reduced system."""
    def norm(p: float, n: float) -> float:
        g1, g2 = _overflow_equations(i_cap, beta, zeta, p, n)
        return max(abs(g1), abs(g2))

    best = norm(rho, nu)
    for _ in range(60):
        if best <= 1e-14:
            break
        g1, g2 = _overflow_equations(i_cap, beta, zeta, rho, nu)
        h1 = 1e-7 * max(rho, 1.0)
        h2 = 1e-7 * max(nu, 1.0)
        a = (_overflow_equations(i_cap, beta, zeta, rho + h1, nu)[0] - g1) / h1
        c = (_overflow_equations(i_cap, beta, zeta, rho + h1, nu)[1] - g2) / h1
        b = (_overflow_equations(i_cap, beta, zeta, rho, nu + h2)[0] - g1) / h2
        d = (_overflow_equations(i_cap, beta, zeta, rho, nu + h2)[1] - g2) / h2
        det = a * d - b * c
        if det == 0.0 or not math.isfinite(det):
            break
        drho = (-g1 * d + g2 * b) / det
        dnu = (-g2 * a + g1 * c) / det
        step = 1.0
        improved = False
        for _ in range(40):
            p = rho + step * drho
            n = nu + step * dnu
            if p > 1e-12 and n > 1e-12:
                val = norm(p, n)
                if val < best:
                    rho, nu, best = p, n, val
                    improved = True
                    break
            step *= 0.5
        if not improved:
            break
    return rho, nu


def overflow_rate(capacity_index: int, beta: float, eta: float,
                  *, allow_below_mean: bool = False) -> OverflowSolution:
    """Rate for the event "overflow exceeds eta*n balls at time beta*n".

    Overflow counts every ball thrown into an urn already holding the
    capacity count.  eta must exceed the zero-cost overflow unless
    allow_below_mean is set, in which case the mirrored lower-tail
    event is solved by the same equations with nu < rho < 1.
    """
    i_cap = int(capacity_index)
    if i_cap != capacity_index or i_cap < 1:
        raise DomainError(
            f"capacity index must be an integer >= 1, got {capacity_index!r}")
    beta = float(beta)
    eta = float(eta)
    if not beta > 0.0 or not math.isfinite(beta):
        raise DomainError(f"beta must be positive and finite, got {beta!r}")
    if not math.isfinite(eta):
        raise DomainError(f"eta must be finite, got {eta!r}")

    zeta = eta + i_cap - beta
    zeta_floor = max(i_cap - beta, 0.0)
    if zeta < zeta_floor - 1e-12 or zeta >= i_cap - 1e-12:
        raise DomainError(
            f"eta = {eta!r} demands spare capacity zeta = {zeta:.6g} outside "
            f"[{zeta_floor:.6g}, {i_cap}) and is unreachable")

    zeta_zero = math.fsum((i_cap - i) * poisson_pmf(i, beta)
                          for i in range(i_cap + 1))
    if abs(zeta - zeta_zero) <= 1e-12 * max(1.0, zeta_zero):
        sol = OverflowSolution(i_cap, beta, eta, zeta, 1.0, 1.0, 1.0, 0.0)
        return sol
    if zeta < zeta_zero:
        if not allow_below_mean:
            raise DomainError(
                f"typical overflow already exceeds eta = {eta!r} "
                f"(zero-cost spare capacity {zeta_zero:.6g} vs demanded "
                f"{zeta:.6g}); pass allow_below_mean=True for the "
                f"lower-tail problem")
        if zeta <= zeta_floor + 1e-12:
            raise DomainError(
                f"zeta = {zeta:.6g} sits on the reachability boundary "
                f"{zeta_floor:.6g}; the twist degenerates there")

    def outer(rho: float) -> float:
        nu = _overflow_nu(i_cap, beta, rho)
        return _overflow_equations(i_cap, beta, zeta, rho, nu)[1]

    if zeta > zeta_zero:
        # outer(1) = zeta_zero - zeta < 0
        lo = 1.0
        hi = 2.0
        for _ in range(60):
            if outer(hi) > 0.0:
                break
            hi *= 2.0
        else:
            raise BracketFailure("no upper bracket for the overflow tilt rho")
        rho = float(brentq(outer, lo, hi, xtol=1e-14, rtol=_BRENTQ_RTOL,
                           maxiter=200))
    else:
        # outer(1) = zeta_zero - zeta > 0; walk down, backing off when
        # the inner equation loses its root (rho left the valid branch)
        hi = 1.0
        lo = None
        cand = 0.5
        for _ in range(200):
            try:
                val = outer(cand)
            except BracketFailure:
                cand = 0.5 * (cand + hi)
                if hi - cand < 1e-13:
                    break
                continue
            if val < 0.0:
                lo = cand
                break
            hi = cand
            cand *= 0.5
        if lo is None:
            raise BracketFailure("no lower bracket for the overflow tilt rho")
        rho = float(brentq(outer, lo, hi, xtol=1e-14, rtol=_BRENTQ_RTOL,
                           maxiter=200))

    nu = _overflow_nu(i_cap, beta, rho)
    rho, nu = _overflow_polish(i_cap, beta, zeta, rho, nu)

    rate = rho * beta
    q = _overflow_q(i_cap, rate)
    r = _overflow_r(i_cap, rate, nu)
    scale = 1.0 / (r + q)

    residuals = (
        scale * (r + q) - 1.0,
        (scale * ((rate / nu) * r + rate * q) - beta) / max(1.0, beta),
        (scale * (i_cap * poisson_pmf(i_cap, rate) + (i_cap - rate / nu) * r)
         - zeta) / max(1.0, zeta),
    )
    worst = max(abs(e) for e in residuals)
    if worst > 1e-9:
        raise SolverFailure(
            f"overflow constraint residuals {residuals!r} exceed 1e-9 at "
            f"rho = {rho!r}, nu = {nu!r}")

    if zeta > zeta_zero and not (nu > rho > 1.0):
        raise SolverFailure(
            f"expected nu > rho > 1 for an above-typical overflow, got "
            f"rho = {rho!r}, nu = {nu!r}")
    if zeta < zeta_zero and not (nu < rho < 1.0):
        raise SolverFailure(
            f"expected nu < rho < 1 for a below-typical overflow, got "
            f"rho = {rho!r}, nu = {nu!r}")

    exponent = (math.log(scale) + beta * (1.0 - rho) + beta * math.log(rho)
                + zeta * math.log(nu))
    return OverflowSolution(i_cap, beta, eta, zeta, rho, nu, scale, exponent)


# ---------------------------------------------------------------------------
# low-occupancy shortfall


@dataclass(frozen=True)
class CouponSolution:
    """Tilt data for an atypically small low-occupancy fraction.

    Urns start at class levels 0..K with weights alpha_k; an urn is
    "low" while its terminal level stays at or below the capacity
    index.  Mass on low counts carries the extra factor W < 1; C_k
    renormalises each class.
    """

    class_weights: tuple[float, ...]
    capacity_index: int
    beta: float
    xi: float
    rho: float
    W: float
    class_scales: dict[int, float]
    J_C: float

    def class_distribution(self, k: int) -> CountDistribution:
        if not 0 <= k < len(self.class_weights):
            raise DomainError(f"class {k!r} outside 0..{len(self.class_weights) - 1}")
        rate = self.rho * self.beta
        c_k = self.class_scales[k]
        room = self.capacity_index - k
        head = tuple(c_k * self.W * poisson_pmf(j, rate)
                     for j in range(room + 1))
        return CountDistribution(head, c_k, rate, mass_tolerance=1e-8)

    def terminal_occupancy(self) -> SimplexVector:
        dists = [self.class_distribution(k)
                 for k in range(len(self.class_weights))]
        head = []
        for i in range(self.capacity_index + 1):
            mass = math.fsum(a * dists[k].pmf(i - k)
                             for k, a in enumerate(self.class_weights)
                             if a > 0.0 and k <= i)
            head.append(mass)
        over = max(1.0 - math.fsum(head), 0.0)
        return SimplexVector((*head, over), self.capacity_index)

    def residuals(self) -> dict[str, float]:
        rate = self.rho * self.beta
        i_cap = self.capacity_index
        agg = 0.0
        mean = 0.0
        norm_worst = 0.0
        for k, a in enumerate(self.class_weights):
            head = poisson_head_mass(i_cap - k, rate)
            tail = poisson_tail_mass(i_cap - k, rate)
            c_k = self.class_scales[k]
            norm_worst = max(norm_worst,
                             abs(c_k * (self.W * head + tail) - 1.0))
            tail_mean = poisson_tail_mean(i_cap - k, rate)
            agg += a * c_k * self.W * head
            mean += a * c_k * (self.W * (rate - tail_mean) + tail_mean)
        return {
            "aggregate": agg - self.xi,
            "conservation": (mean - self.beta) / max(1.0, self.beta),
            "normalization": norm_worst,
        }


def _coupon_weights(alpha, i_cap: int) -> tuple[float, ...]:
    if isinstance(alpha, SimplexVector):
        if alpha.overflow > 1e-12:
            raise DomainError(
                "class mix places mass beyond its top class; the "
                "low-occupancy problem needs start levels within capacity")
        entries = alpha.head
    else:
        entries = tuple(float(a) for a in alpha)
    if not entries:
        raise DomainError("class mix must contain at least one class")
    if any(a < 0.0 or not math.isfinite(a) for a in entries):
        raise DomainError(f"class weights must be nonnegative, got {entries!r}")
    total = math.fsum(entries)
    if abs(total - 1.0) > 2e-6:
        raise DomainError(f"class weights sum to {total!r}, expected 1")
    top = max(k for k, a in enumerate(entries) if a > 0.0)
    entries = entries[:top + 1]
    if top > i_cap:
        raise DomainError(
            f"highest start class {top} exceeds the capacity index {i_cap}")
    return entries


def _coupon_low_floor(weights: tuple[float, ...], i_cap: int,
                      beta: float) -> float:
    """Smallest reachable low-occupancy fraction given the ball budget.

    Lifting a class-k urn out of the low set costs I+1-k balls, so the
    cheapest removal plan spends the budget on the highest classes
    first; leftover balls can always be dumped on urns already lifted.
    """
    budget = beta
    removed = 0.0
    for k in range(len(weights) - 1, -1, -1):
        cost = i_cap + 1 - k
        take = min(weights[k], budget / cost)
        removed += take
        budget -= take * cost
        if budget <= 0.0:
            break
    return 1.0 - removed


def coupon_rate(alpha, capacity_index: int, beta: float,
                xi: float) -> CouponSolution:
    """Rate for the event "fewer than xi*n urns stay at low occupancy".

    A class-k urn is low while it gains at most I-k balls.  The tilted
    law scales Poisson(rho*beta) mass on low counts by W and
    renormalises per class; rho restores ball conservation.
    """
    i_cap = int(capacity_index)
    if i_cap != capacity_index or i_cap < 0:
        raise DomainError(
            f"capacity index must be an integer >= 0, got {capacity_index!r}")
    beta = float(beta)
    xi = float(xi)
    if not beta > 0.0 or not math.isfinite(beta):
        raise DomainError(f"beta must be positive and finite, got {beta!r}")
    if not xi > 0.0 or not math.isfinite(xi):
        raise DomainError(f"xi must be positive and finite, got {xi!r}")
    weights = _coupon_weights(alpha, i_cap)

    xi_zero = math.fsum(a * poisson_head_mass(i_cap - k, beta)
                        for k, a in enumerate(weights))
    if abs(xi - xi_zero) <= 1e-12 * max(1.0, xi_zero):
        scales = {k: 1.0 for k in range(len(weights))}
        return CouponSolution(weights, i_cap, beta, xi, 1.0, 1.0, scales, 0.0)
    if xi > xi_zero:
        raise DomainError(
            f"xi = {xi!r} is above the zero-cost value {xi_zero:.6g}; the "
            f"event is typical and carries rate 0")

    floor = _coupon_low_floor(weights, i_cap, beta)
    if xi <= floor + 1e-12:
        raise InfeasibleInput(
            f"xi = {xi!r} is at or below the reachability floor {floor:.6g} "
            f"set by the ball budget")

    def class_masses(rho: float) -> tuple[list[float], list[float]]:
        rate = rho * beta
        heads = [poisson_head_mass(i_cap - k, rate) for k in range(len(weights))]
        tails = [poisson_tail_mass(i_cap - k, rate) for k in range(len(weights))]
        return heads, tails

    def low_share(log_w: float, head: float, tail: float) -> float:
        # W*head / (W*head + tail), stable in log space
        if head <= 0.0:
            return 0.0
        if tail <= 0.0:
            return 1.0
        z = math.log(tail / head) - log_w
        if z > 700.0:
            return 0.0
        if z < -700.0:
            return 1.0
        return 1.0 / (1.0 + math.exp(z))

    def solve_log_w(rho: float) -> float:
        heads, tails = class_masses(rho)

        def aggregate(log_w: float) -> float:
            return math.fsum(a * low_share(log_w, heads[k], tails[k])
                             for k, a in enumerate(weights)) - xi

        lo, hi = -1.0, 1.0
        for _ in range(100):
            if aggregate(lo) < 0.0:
                break
            lo *= 2.0
        else:
            raise BracketFailure("no lower bracket for the low-count factor W")
        for _ in range(100):
            if aggregate(hi) > 0.0:
                break
            hi *= 2.0
        else:
            raise BracketFailure("no upper bracket for the low-count factor W")
        return float(brentq(aggregate, lo, hi, xtol=1e-13,
                            rtol=_BRENTQ_RTOL, maxiter=200))

    def conservation(rho: float) -> float:
        log_w = solve_log_w(rho)
        w = math.exp(log_w)
        rate = rho * beta
        heads, tails = class_masses(rho)
        total = 0.0
        for k, a in enumerate(weights):
            if a == 0.0:
                continue
            c_k = 1.0 / (w * heads[k] + tails[k])
            tail_mean = poisson_tail_mean(i_cap - k, rate)
            total += a * c_k * (w * (rate - tail_mean) + tail_mean)
        return total - beta

    g0 = conservation(1.0)
    if abs(g0) <= 1e-14:
        rho = 1.0
    elif g0 > 0.0:
        hi = 1.0
        lo = 0.5
        for _ in range(100):
            if conservation(lo) < 0.0:
                break
            lo *= 0.5
        else:
            raise BracketFailure("no lower bracket for the coupon tilt rho")
        rho = float(brentq(conservation, lo, hi, xtol=1e-14,
                           rtol=_BRENTQ_RTOL, maxiter=200))
    else:
        lo = 1.0
        hi = 2.0
        for _ in range(100):
            if conservation(hi) > 0.0:
                break
            hi *= 2.0
        else:
            raise BracketFailure("no upper bracket for the coupon tilt rho")
        rho = float(brentq(conservation, lo, hi, xtol=1e-14,
                           rtol=_BRENTQ_RTOL, maxiter=200))

    log_w = solve_log_w(rho)
    w = math.exp(log_w)
    rate = rho * beta
    heads, tails = class_masses(rho)
    scales = {k: 1.0 / (w * heads[k] + tails[k]) for k in range(len(weights))}

    agg = math.fsum(a * scales[k] * w * heads[k]
                    for k, a in enumerate(weights)) - xi
    cons = conservation(rho)
    worst = max(abs(agg), abs(cons) / max(1.0, beta))
    if worst > 1e-9:
        raise SolverFailure(
            f"coupon constraint residuals (aggregate {agg!r}, conservation "
            f"{cons!r}) exceed 1e-9 at rho = {rho!r}, W = {w!r}")

    exponent = (beta * (1.0 - rho + math.log(rho)) + xi * log_w
                + math.fsum(a * math.log(scales[k])
                            for k, a in enumerate(weights) if a > 0.0))

    solution = CouponSolution(weights, i_cap, beta, xi, rho, w, scales,
                              exponent)

    reference = CountDistribution.poisson(beta)
    entropy_route = math.fsum(
        a * relative_entropy(solution.class_distribution(k), reference)
        for k, a in enumerate(weights) if a > 0.0)
    if abs(exponent - entropy_route) > 1e-10 * max(1.0, abs(exponent)):
        raise SolverFailure(
            f"coupon exponent {exponent!r} disagrees with the classwise "
            f"divergence route {entropy_route!r}")
    return solution


# ---------------------------------------------------------------------------
# linear terminal-set dispatch


@dataclass(frozen=True)
class LinearTerminalConstraint:
    """One linear inequality on the terminal occupancies.

    weights has one coefficient per occupancy slot, overflow last;
    relation is "<=" or ">=" (aliases "<" and ">" accepted); the event
    is weights . gamma(beta) relation threshold.
    """

    weights: tuple[float, ...]
    relation: str
    threshold: float

    def __post_init__(self):
        weights = tuple(float(v) for v in self.weights)
        object.__setattr__(self, "weights", weights)
        if any(not math.isfinite(v) for v in weights):
            raise DomainError(f"constraint weights must be finite, got {weights!r}")
        if all(v == 0.0 for v in weights):
            raise DomainError("constraint weights are all zero")
        relation = {"<": "<=", "<=": "<=", ">": ">=", ">=": ">="}.get(self.relation)
        if relation is None:
            raise DomainError(
                f"relation must be one of <, <=, >, >=, got {self.relation!r}")
        object.__setattr__(self, "relation", relation)
        threshold = float(self.threshold)
        if not math.isfinite(threshold):
            raise DomainError(f"threshold must be finite, got {threshold!r}")
        object.__setattr__(self, "threshold", threshold)

    def value(self, state: SimplexVector) -> float:
        if len(self.weights) != len(state.entries):
            raise DomainError(
                f"constraint has {len(self.weights)} coefficients but the "
                f"occupancy vector has {len(state.entries)} slots")
        return math.fsum(v * e for v, e in zip(self.weights, state.entries))

    def satisfied_by(self, state: SimplexVector) -> bool:
        value = self.value(state)
        if self.relation == "<=":
            return value <= self.threshold
        return value >= self.threshold


def _uniform_prefix_scale(weights: tuple[float, ...]) -> float | None:
    # (c, c, ..., c, 0) across the head, nothing on overflow
    head, over = weights[:-1], weights[-1]
    if abs(over) > 1e-12:
        return None
    c = head[0]
    if c <= 0.0:
        return None
    if any(abs(v - c) > 1e-12 * max(1.0, c) for v in head):
        return None
    return c


def _spare_capacity_scale(weights: tuple[float, ...]) -> float | None:
    # (c*I, c*(I-1), ..., c, 0, 0): weight I-i on level i, none past capacity
    head, over = weights[:-1], weights[-1]
    i_cap = len(head) - 1
    if i_cap < 1 or abs(over) > 1e-12:
        return None
    c = head[i_cap - 1]
    if c <= 0.0:
        return None
    tol = 1e-12 * max(1.0, c * i_cap)
    if any(abs(head[i] - c * (i_cap - i)) > tol for i in range(i_cap + 1)):
        return None
    return c


def terminal_set_rate(alpha: SimplexVector, beta: float,
                      constraint: LinearTerminalConstraint,
                      ) -> tuple[float, SimplexVector]:
    """Decay rate of a half-space terminal event, with its argmin.

    Recognised families: a uniform weight on all head levels with
    relation "<=" (low-occupancy shortfall) and weights I-i with
    relation ">=" from an empty start (overflow).  A constraint already
    met by the zero-cost endpoint costs nothing.  Anything else raises
    UnsupportedConstraintFamily.
    """
    beta = float(beta)
    if not beta > 0.0 or not math.isfinite(beta):
        raise DomainError(f"beta must be positive and finite, got {beta!r}")
    if len(constraint.weights) != len(alpha.entries):
        raise DomainError(
            f"constraint has {len(constraint.weights)} coefficients but the "
            f"start vector has {len(alpha.entries)} slots")

    free_end = zero_cost_path(alpha, beta).gamma(beta)
    if constraint.satisfied_by(free_end):
        return 0.0, free_end

    i_cap = alpha.capacity_index

    scale = _uniform_prefix_scale(constraint.weights)
    if scale is not None and constraint.relation == "<=":
        if alpha.overflow > 1e-12:
            raise UnsupportedConstraintFamily(
                "low-occupancy family needs the start mix inside capacity")
        solution = coupon_rate(alpha, i_cap, beta,
                               constraint.threshold / scale)
        return solution.J_C, solution.terminal_occupancy()

    scale = _spare_capacity_scale(constraint.weights)
    if scale is not None and constraint.relation == ">=":
        if abs(alpha.entries[0] - 1.0) > 1e-12:
            raise UnsupportedConstraintFamily(
                "overflow family is implemented for the empty start only")
        zeta = constraint.threshold / scale
        solution = overflow_rate(i_cap, beta, zeta + beta - i_cap)
        return solution.J_O, solution.terminal_occupancy()

    raise UnsupportedConstraintFamily(
        "supported families: uniform head weights with <=, and spare-capacity "
        "weights I-i with >= from an empty start")
