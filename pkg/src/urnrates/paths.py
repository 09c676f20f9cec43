"""Occupancy paths: validity, cost, and closed-form path families.

A path assigns to each time x in [0, beta] an occupancy state
gamma(x) and a throw-rate vector theta(x) (where the next ball lands,
by current occupancy level). The two are linked by the fixed linear
map

    d/dx gamma_0   = -theta_0
    d/dx gamma_i   =  theta_{i-1} - theta_i      (1 <= i <= I)
    d/dx gamma_{I+} =  theta_I

equivalently d/dx psi_i = -theta_i for the cumulative occupancies
psi_i = sum_{j<=i} gamma_j. Balls landing on overflow urns (rate
theta_{I+}) do not move the state.

In cumulative coordinates a path is valid iff
  (a) ordering:     psi_{i-1} <= psi_i at every time,
  (b) monotonicity: each psi_i is nonincreasing in time,
  (c) conservation: sum_{i<=I} (psi_i(x) - psi_i(y)) <= y - x for
      x < y (balls arrive at rate at most one per urn per unit time).
Conditions (b) and (c) are additive over subintervals, so checking
adjacent grid pairs suffices: any x < y sums the adjacent-pair
inequalities between them.

The path cost is the time integral of D(theta(x) || gamma(x)). Two
integration routes live in path_cost: closed-form path objects are
integrated by composite Simpson on a fine grid (falling back to
adaptive open-interval quadrature when an endpoint integrand is
infinite but integrable), and sampled grids are integrated exactly as
piecewise-linear interpolants with per-interval constant rates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .entropy import poisson_pmf, relative_entropy
from .errors import DomainError, InfeasibleInput, InvalidPath
from .types import EndpointConstraint, OccupancyPathGrid, SimplexVector

__all__ = [
    "ValidityReport",
    "validity_check",
    "path_cost",
    "zero_cost_path",
    "ZeroCostPath",
    "LinearPath",
    "PiecewisePath",
    "ComboPath",
    "rate_to_velocity",
]

# Gauss-Legendre nodes/weights on [0, 1], degree-9 exactness.
_GAUSS5_X = (0.04691007703066800, 0.23076534494715845, 0.5,
             0.76923465505284155, 0.95308992296933200)
_GAUSS5_W = (0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
             0.23931433524968324, 0.11846344252809454)


def rate_to_velocity(theta: Sequence[float]) -> tuple[float, ...]:
    """Apply the fixed rate-to-state-velocity map (gamma-dot from theta)."""
    th = tuple(theta.entries if isinstance(theta, SimplexVector) else theta)
    head = th[:-1]
    out = [-head[0]]
    for a, b in zip(head, head[1:]):
        out.append(a - b)
    out.append(head[-1])
    return tuple(out)


@dataclass(frozen=True)
class ValidityReport:
    ok: bool
    condition: str | None = None   # "ordering" | "monotonicity" | "conservation"
    time_index: int | None = None
    level: int | None = None
    magnitude: float = 0.0

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return "valid"
        return (f"{self.condition} violated at grid index "
                f"{self.time_index}, level {self.level}, by "
                f"{self.magnitude:.3e}")


def _psi_rows(path) -> tuple[tuple[float, ...], list[tuple[float, ...]]]:
    if isinstance(path, OccupancyPathGrid):
        return path.times, path.psi_grid()
    times, rows = path
    return tuple(float(t) for t in times), [tuple(r) for r in rows]


def validity_check(path, tol: float = 1e-9) -> ValidityReport:
    """Check the valid-path conditions on a grid.

    Accepts an OccupancyPathGrid or a (times, psi_rows) pair where
    each row holds psi_0..psi_I. Returns the first violation found,
    scanning (a) ordering, then (b)/(c) over adjacent time pairs.
    """
    times, rows = _psi_rows(path)
    for t_idx, row in enumerate(rows):
        prev = 0.0
        for lvl, value in enumerate(row):
            if value < prev - tol:
                return ValidityReport(False, "ordering", t_idx, lvl,
                                      prev - value)
            prev = value
    for t_idx in range(len(times) - 1):
        dx = times[t_idx + 1] - times[t_idx]
        here, nxt = rows[t_idx], rows[t_idx + 1]
        for lvl in range(len(here)):
            if nxt[lvl] > here[lvl] + tol:
                return ValidityReport(False, "monotonicity", t_idx + 1, lvl,
                                      nxt[lvl] - here[lvl])
        consumed = math.fsum(here) - math.fsum(nxt)
        if consumed > dx + tol:
            return ValidityReport(False, "conservation", t_idx + 1, None,
                                  consumed - dx)
    return ValidityReport(True)


class ZeroCostPath:
    """The uncontrolled flow: every urn gains Poisson(x) balls by time x.

    gamma_j(x) = sum_{k<=j} alpha_k P_{j-k}(x) for j <= I, the rest in
    the overflow slot, and theta(x) = gamma(x) (balls land where the
    occupancies currently sit). This is the unique zero-cost path.
    """

    def __init__(self, alpha: SimplexVector, beta: float):
        beta = float(beta)
        if beta <= 0.0:
            raise DomainError(f"beta must be > 0, got {beta!r}")
        self.alpha = alpha
        self.beta = beta

    def gamma(self, x: float) -> SimplexVector:
        if x < 0.0 or x > self.beta + 1e-12:
            raise DomainError(f"x = {x!r} outside [0, {self.beta}]")
        cap = self.alpha.capacity_index
        a = self.alpha.head
        head = []
        for j in range(cap + 1):
            head.append(math.fsum(
                a[k] * poisson_pmf(j - k, x) for k in range(j + 1)))
        over = max(1.0 - math.fsum(head), 0.0)
        return SimplexVector((*head, over), cap)

    def theta(self, x: float) -> SimplexVector:
        return self.gamma(x)

    def psi(self, x: float) -> tuple[float, ...]:
        return self.gamma(x).psi()

    def sample(self, n_points: int = 1001) -> OccupancyPathGrid:
        times = np.linspace(0.0, self.beta, n_points)
        states = tuple(self.gamma(float(t)) for t in times)
        return OccupancyPathGrid(tuple(float(t) for t in times), states)


def zero_cost_path(alpha: SimplexVector, beta: float) -> ZeroCostPath:
    return ZeroCostPath(alpha, beta)


class LinearPath:
    """Straight-line interpolation between the endpoint occupancies.

    gamma(x) = (1 - x/beta) alpha + (x/beta) omega, with the constant
    rate vector theta_i = (psi^alpha_i - psi^omega_i) / beta for
    i <= I and the remainder thrown at overflow urns. This is a valid
    path exactly when the endpoint constraint is feasible; the
    constructor rejects infeasible constraints, naming the violated
    condition family.
    """

    def __init__(self, constraint: EndpointConstraint):
        if constraint.beta <= 0.0:
            raise DomainError("linear path needs beta > 0")
        self.constraint = constraint
        self.beta = constraint.beta
        alpha, omega = constraint.alpha, constraint.omega
        psi_a, psi_w = alpha.psi(), omega.psi()
        head = []
        for i, (pa, pw) in enumerate(zip(psi_a, psi_w)):
            ti = (pa - pw) / self.beta
            if ti < -1e-12:
                raise InfeasibleInput(
                    f"monotonicity: cumulative target at level {i} exceeds "
                    f"cumulative start by {pw - pa:.3e}")
            head.append(max(ti, 0.0))
        spill = 1.0 - math.fsum(head)
        if spill < -1e-12:
            raise InfeasibleInput(
                "conservation: targets need more than one ball per urn "
                f"per unit time (deficit {-spill:.3e})")
        self._theta = SimplexVector((*head, max(spill, 0.0)),
                                    alpha.capacity_index)

    def gamma(self, x: float) -> SimplexVector:
        if x < 0.0 or x > self.beta + 1e-12:
            raise DomainError(f"x = {x!r} outside [0, {self.beta}]")
        lam = min(x / self.beta, 1.0)
        a = self.constraint.alpha.entries
        w = self.constraint.omega.entries
        mix = tuple((1.0 - lam) * ai + lam * wi for ai, wi in zip(a, w))
        return SimplexVector(mix, self.constraint.capacity_index)

    def theta(self, x: float) -> SimplexVector:
        return self._theta

    def sample(self, n_points: int = 1001) -> OccupancyPathGrid:
        times = tuple(float(t) for t in np.linspace(0.0, self.beta, n_points))
        states = tuple(self.gamma(t) for t in times)
        rates = tuple(self._theta for _ in range(n_points - 1))
        return OccupancyPathGrid(times, states, rates)


class PiecewisePath:
    """Piecewise-linear path through waypoint states.

    Each segment uses the constant rate vector of its own LinearPath,
    so the whole path is valid iff each consecutive state pair is
    feasible for its segment length.
    """

    def __init__(self, times: Sequence[float], states: Sequence[SimplexVector]):
        self.times = tuple(float(t) for t in times)
        self.states = tuple(states)
        if len(self.times) != len(self.states) or len(self.times) < 2:
            raise DomainError("need matching times/states, at least two")
        if self.times[0] != 0.0:
            raise DomainError("piecewise path must start at time 0")
        self.beta = self.times[-1]
        self._segments = []
        for k in range(len(self.times) - 1):
            seg_beta = self.times[k + 1] - self.times[k]
            c = EndpointConstraint(self.states[k], self.states[k + 1],
                                   seg_beta)
            self._segments.append(LinearPath(c))

    def _locate(self, x: float) -> tuple[int, float]:
        if x < 0.0 or x > self.beta + 1e-12:
            raise DomainError(f"x = {x!r} outside [0, {self.beta}]")
        k = int(np.searchsorted(self.times, x, side="right")) - 1
        k = min(max(k, 0), len(self._segments) - 1)
        return k, x - self.times[k]

    def gamma(self, x: float) -> SimplexVector:
        k, off = self._locate(x)
        return self._segments[k].gamma(min(off, self._segments[k].beta))

    def theta(self, x: float) -> SimplexVector:
        k, _ = self._locate(x)
        return self._segments[k]._theta


class ComboPath:
    """Pointwise convex combination of paths sharing endpoints.

    States and rates combine with the same fixed weights, so the
    state/rate link is preserved and validity is inherited (all three
    valid-path conditions are closed under convex combination).
    """

    def __init__(self, paths: Sequence, weights: Sequence[float]):
        if len(paths) != len(weights) or not paths:
            raise DomainError("need matching nonempty paths/weights")
        w = [float(x) for x in weights]
        if any(x < 0.0 for x in w) or abs(math.fsum(w) - 1.0) > 1e-12:
            raise DomainError("weights must be a convex combination")
        betas = {round(p.beta, 12) for p in paths}
        if len(betas) != 1:
            raise DomainError("paths disagree on beta")
        self.paths = tuple(paths)
        self.weights = tuple(w)
        self.beta = paths[0].beta

    def _mix(self, vectors: Sequence[SimplexVector]) -> SimplexVector:
        cap = vectors[0].capacity_index
        entries = np.zeros(cap + 2)
        for wgt, vec in zip(self.weights, vectors):
            entries += wgt * np.asarray(vec.entries)
        return SimplexVector(tuple(entries), cap)

    def gamma(self, x: float) -> SimplexVector:
        return self._mix([p.gamma(x) for p in self.paths])

    def theta(self, x: float) -> SimplexVector:
        return self._mix([p.theta(x) for p in self.paths])


def _interval_cost(theta: SimplexVector, g0: SimplexVector,
                   g1: SimplexVector, dx: float) -> float:
    """Exact-cost quadrature for one interval of a sampled grid.

    gamma is affine on the interval, theta constant. Gauss-5 on the
    open interval is exact for the smooth part and convergent for the
    integrable log endpoints (gamma_i hitting zero at an interval end
    with theta_i > 0).
    """
    th = theta.entries
    a = np.asarray(g0.entries)
    b = np.asarray(g1.entries)
    for i, t in enumerate(th):
        if t > 0.0 and a[i] <= 0.0 and b[i] <= 0.0:
            return math.inf
    total = 0.0
    for u, w in zip(_GAUSS5_X, _GAUSS5_W):
        g = (1.0 - u) * a + u * b
        d = 0.0
        for i, t in enumerate(th):
            if t == 0.0:
                continue
            gi = g[i]
            if gi <= 0.0:
                return math.inf
            d += t * math.log(t / gi)
        total += w * d
    return total * dx


def _grid_cost(path: OccupancyPathGrid) -> float:
    report = validity_check(path)
    if not report:
        raise InvalidPath(report.describe())
    cap = path.capacity_index
    rates = path.rates
    pieces = []
    for k in range(len(path.times) - 1):
        dx = path.times[k + 1] - path.times[k]
        if rates is not None:
            theta = rates[k]
        else:
            p0 = path.states[k].psi()
            p1 = path.states[k + 1].psi()
            head = [max((a - b) / dx, 0.0) for a, b in zip(p0, p1)]
            spill = max(1.0 - math.fsum(head), 0.0)
            theta = SimplexVector((*head, spill), cap)
        piece = _interval_cost(theta, path.states[k], path.states[k + 1], dx)
        if piece == math.inf:
            return math.inf
        pieces.append(piece)
    return math.fsum(pieces)


def _callable_cost(path, points: int) -> float:
    beta = path.beta
    if points % 2 == 0:
        points += 1

    def integrand(x: float) -> float:
        return relative_entropy(path.theta(x), path.gamma(x))

    xs = np.linspace(0.0, beta, points)
    values = [integrand(float(x)) for x in xs]
    if any(math.isinf(v) for v in values[1:-1]):
        return math.inf
    if math.isfinite(values[0]) and math.isfinite(values[-1]):
        h = beta / (points - 1)
        weights = np.ones(points)
        weights[1:-1:2] = 4.0
        weights[2:-2:2] = 2.0
        return float(np.dot(weights, values) * h / 3.0)
    # Integrable endpoint blow-up: adaptive open-interval quadrature.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, _ = quad(integrand, 0.0, beta, limit=300,
                        epsabs=1e-11, epsrel=1e-10)
    return float(value)


def path_cost(path, *, points: int = 2001) -> float:
    """Integral of D(theta(x) || gamma(x)) along the path.

    Sampled grids (OccupancyPathGrid) are integrated as
    piecewise-linear interpolants; closed-form path objects (anything
    with gamma/theta callables and a beta attribute) by composite
    Simpson at the given resolution, with an adaptive fallback when an
    endpoint integrand diverges. Raises InvalidPath for grids that
    fail validity_check; returns +inf for infinite-cost paths.
    """
    if isinstance(path, OccupancyPathGrid):
        return _grid_cost(path)
    if not (hasattr(path, "gamma") and hasattr(path, "theta")
            and hasattr(path, "beta")):
        raise DomainError(
            "path must be an OccupancyPathGrid or expose gamma/theta/beta")
    return _callable_cost(path, points)
