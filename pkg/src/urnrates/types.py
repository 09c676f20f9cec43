"""Core value types for urn occupancy problems.

The model: n urns receive r = floor(beta*n) balls one at a time, each
thrown into a uniformly random urn. Urns are classified by how many
balls they contain, with every level above a capacity index I lumped
into a single overflow bucket written "I+". The occupancy state is
therefore a probability vector on I+2 points,

    gamma = (gamma_0, ..., gamma_I, gamma_{I+}),

gamma_i being the fraction of urns holding exactly i balls (the last
slot: more than I). Time is measured in balls thrown per urn, running
from 0 to beta.

Three vector-like types live here. SimplexVector holds occupancy
states, initial conditions, terminal targets and throw-rate vectors
alike (they are all points of the same simplex). CountDistribution
holds distributions over ball counts 0, 1, 2, ... with an explicit
scaled-Poisson analytic tail so that nothing is ever silently
truncated. OccupancyPathGrid holds a sampled occupancy path.

EndpointConstraint packages (alpha, omega, beta): start occupancies,
target occupancies, throw budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

from .errors import DomainError

# Internal producers are expected to hit 1e-12; user-facing surfaces
# construct with looser, documented tolerances (the CLI uses 1e-6).
SUM_TOL = 1e-9
NEG_CLAMP = 1e-12


def _clean_entries(entries: Sequence[float], where: str) -> tuple[float, ...]:
    out = []
    for idx, e in enumerate(entries):
        e = float(e)
        if e < 0.0:
            if e < -NEG_CLAMP:
                raise DomainError(
                    f"{where}: entry {idx} is negative ({e!r})")
            e = 0.0
        out.append(e)
    return tuple(out)


@dataclass(frozen=True)
class SimplexVector:
    """Probability vector on I+2 points: levels 0..I plus the overflow slot.

    entries: (v_0, ..., v_I, v_{I+}), each >= 0, summing to 1 within
    the construction tolerance. capacity_index is I. Entries are
    stored exactly as given (tiny negatives below 1e-12 are clamped to
    zero); no renormalization ever happens here.
    """

    entries: tuple[float, ...]
    capacity_index: int

    def __init__(self, entries: Sequence[float], capacity_index: int | None = None,
                 *, tolerance: float = SUM_TOL):
        entries = tuple(float(e) for e in entries)
        if capacity_index is None:
            capacity_index = len(entries) - 2
        if capacity_index < 0 or len(entries) != capacity_index + 2:
            raise DomainError(
                f"need I+2 entries for capacity index {capacity_index}, "
                f"got {len(entries)}")
        cleaned = _clean_entries(entries, "SimplexVector")
        total = math.fsum(cleaned)
        if abs(total - 1.0) > tolerance:
            raise DomainError(
                f"SimplexVector entries sum to {total!r}, off from 1 by "
                f"{abs(total - 1.0):.3e} (tolerance {tolerance:g}); "
                "refusing to renormalize")
        object.__setattr__(self, "entries", cleaned)
        object.__setattr__(self, "capacity_index", capacity_index)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> float:
        return self.entries[i]

    def __iter__(self):
        return iter(self.entries)

    @property
    def overflow(self) -> float:
        """Mass in the I+ slot."""
        return self.entries[-1]

    @property
    def head(self) -> tuple[float, ...]:
        """Entries for levels 0..I (everything but the overflow slot)."""
        return self.entries[:-1]

    def psi(self) -> tuple[float, ...]:
        """Cumulative occupancies psi_i = sum_{j<=i} v_j for i = 0..I."""
        acc = 0.0
        out = []
        for e in self.head:
            acc += e
            out.append(acc)
        return tuple(out)

    def head_mean(self) -> float:
        """sum_{i<=I} i*v_i (the overflow slot carries no level number)."""
        return math.fsum(i * e for i, e in enumerate(self.head))

    def sum_defect(self) -> float:
        return math.fsum(self.entries) - 1.0


def simplex(*entries: float, tolerance: float = SUM_TOL) -> SimplexVector:
    """Shorthand constructor: simplex(0.5, 0.3, 0.2) has I = 1."""
    return SimplexVector(entries, tolerance=tolerance)


@dataclass(frozen=True)
class EndpointConstraint:
    """Start occupancies alpha, target occupancies omega, throw budget beta.

    alpha and omega share one capacity index. beta is the number of
    balls thrown per urn; beta == 0 is allowed only for the trivial
    constraint alpha == omega (it arises as a decomposition piece).
    """

    alpha: SimplexVector
    omega: SimplexVector
    beta: float

    def __post_init__(self):
        if self.alpha.capacity_index != self.omega.capacity_index:
            raise DomainError(
                "alpha and omega disagree on capacity index: "
                f"{self.alpha.capacity_index} vs {self.omega.capacity_index}")
        beta = float(self.beta)
        object.__setattr__(self, "beta", beta)
        if beta < 0.0 or not math.isfinite(beta):
            raise DomainError(f"beta must be finite and >= 0, got {beta!r}")
        if beta == 0.0:
            drift = max(abs(a - w) for a, w in
                        zip(self.alpha.entries, self.omega.entries))
            if drift > SUM_TOL:
                raise DomainError(
                    "beta == 0 requires alpha == omega (trivial constraint); "
                    f"max entry difference {drift:.3e}")

    @property
    def capacity_index(self) -> int:
        return self.alpha.capacity_index

    def is_trivial(self) -> bool:
        return self.beta == 0.0

    def standardized(self) -> tuple["EndpointConstraint", int]:
        """Shift levels down so that alpha_0 > 0.

        Returns (shifted constraint, shift). If every urn starts with
        at least s balls, levels 0..s-1 are empty in alpha, and (by
        the monotonicity feasibility conditions) must be empty in
        omega too; dropping them yields an equivalent problem with
        capacity index I - s. DomainError if omega carries mass on a
        dropped level, or if alpha has no head mass at all.
        """
        s = 0
        head = self.alpha.head
        while s < len(head) and head[s] <= 0.0:
            s += 1
        if s == 0:
            return self, 0
        if s == len(head):
            raise DomainError(
                "alpha has all its mass in the overflow slot; capacity "
                "index too small to standardize")
        stray = math.fsum(self.omega.head[:s])
        if stray > SUM_TOL:
            raise DomainError(
                f"omega puts mass {stray:.3e} below the lowest initial "
                "level; constraint is infeasible (urns cannot lose balls)")
        new_i = self.capacity_index - s
        alpha = SimplexVector(self.alpha.entries[s:], new_i)
        # omega head entries below s are numerical dust; fold them into
        # the first kept slot so the total mass is preserved exactly.
        w = list(self.omega.entries[s:])
        w[0] = w[0] + stray
        omega = SimplexVector(w, new_i)
        return EndpointConstraint(alpha, omega, self.beta), s


class Feasibility(Enum):
    """Four-way verdict for an EndpointConstraint.

    FeasibleExponential: reachable, finite rate, strict ball surplus
      (the minimizer has an infinite Poisson-type tail).
    FeasiblePolynomial: reachable with the ball budget exactly
      exhausted by the targets; the minimizer has bounded support.
    FeasibleInfiniteRate: some valid path reaches the target, but
      every such path has infinite cost (the mean-matching
      distribution set is empty); the event decays faster than any
      exponential.
    Infeasible: no valid path at all.
    """

    FeasibleExponential = "FeasibleExponential"
    FeasiblePolynomial = "FeasiblePolynomial"
    FeasibleInfiniteRate = "FeasibleInfiniteRate"
    Infeasible = "Infeasible"


@dataclass(frozen=True)
class CountDistribution:
    """Distribution over ball counts with a scaled-Poisson analytic tail.

    Mass at count i is head[i] for i <= truncation, and
    tail_scale * P_i(tail_rate) for i > truncation, where P_i(t) is
    the Poisson(t) pmf. truncation == len(head) - 1; an empty head
    (truncation -1) with tail_scale 1 is exactly Poisson(tail_rate).

    The head is stored as given. Total mass must be 1 within
    mass_tolerance (default 1e-10, per-construction override for
    intermediate values).
    """

    head: tuple[float, ...]
    tail_scale: float
    tail_rate: float
    truncation: int = field(init=False)

    def __init__(self, head: Sequence[float], tail_scale: float,
                 tail_rate: float, truncation: int | None = None,
                 *, mass_tolerance: float = 1e-10):
        head = _clean_entries(head, "CountDistribution")
        tail_scale = float(tail_scale)
        tail_rate = float(tail_rate)
        if tail_scale < 0.0:
            raise DomainError(f"tail_scale must be >= 0, got {tail_scale!r}")
        if not tail_rate > 0.0:
            raise DomainError(f"tail_rate must be > 0, got {tail_rate!r}")
        if truncation is None:
            truncation = len(head) - 1
        if truncation != len(head) - 1:
            raise DomainError(
                f"truncation {truncation} inconsistent with head length "
                f"{len(head)}")
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "tail_scale", tail_scale)
        object.__setattr__(self, "tail_rate", tail_rate)
        object.__setattr__(self, "truncation", truncation)
        mass = self.total_mass()
        if abs(mass - 1.0) > mass_tolerance:
            raise DomainError(
                f"CountDistribution mass {mass!r} off from 1 by "
                f"{abs(mass - 1.0):.3e} (tolerance {mass_tolerance:g})")

    # Tail helpers live in urnrates.entropy (gamma-function forms);
    # imported lazily to keep this module dependency-light.
    def _tail_mass(self) -> float:
        from .entropy import poisson_tail_mass
        if self.tail_scale == 0.0:
            return 0.0
        return self.tail_scale * poisson_tail_mass(self.truncation,
                                                   self.tail_rate)

    def _tail_mean(self) -> float:
        from .entropy import poisson_tail_mean
        if self.tail_scale == 0.0:
            return 0.0
        return self.tail_scale * poisson_tail_mean(self.truncation,
                                                   self.tail_rate)

    def total_mass(self) -> float:
        return math.fsum(self.head) + self._tail_mass()

    def mean(self) -> float:
        head_part = math.fsum(i * p for i, p in enumerate(self.head))
        return head_part + self._tail_mean()

    def pmf(self, i: int) -> float:
        if i < 0:
            raise DomainError("count must be >= 0")
        if i <= self.truncation:
            return self.head[i]
        if self.tail_scale == 0.0:
            return 0.0
        from .entropy import poisson_log_pmf
        return self.tail_scale * math.exp(poisson_log_pmf(i, self.tail_rate))

    def materialized_head(self, new_truncation: int) -> tuple[float, ...]:
        """Head extended out to new_truncation using the analytic tail."""
        if new_truncation < self.truncation:
            raise DomainError("cannot shrink the head")
        ext = list(self.head)
        for i in range(self.truncation + 1, new_truncation + 1):
            ext.append(self.pmf(i))
        return tuple(ext)

    @classmethod
    def poisson(cls, rate: float) -> "CountDistribution":
        return cls((), 1.0, rate)


def default_truncation(rate: float) -> int:
    """Support bound leaving Poisson(rate) tail mass below ~1e-16."""
    rate = max(float(rate), 0.0)
    return int(math.ceil(rate + 12.0 * math.sqrt(rate) + 40.0))


@dataclass(frozen=True)
class OccupancyPathGrid:
    """Occupancy path sampled on a time grid.

    times: strictly increasing, inside [0, beta] (the grid need not
    start at 0 or reach beta). states: one SimplexVector per time.
    rates: optional, one SimplexVector per interval (the throw-rate
    vector held constant on that interval); when absent, consumers
    recover rates from finite differences of the cumulative sums.

    Whether the sampled path satisfies the valid-path conditions is
    checked by urnrates.paths.validity_check, not here; construction
    only enforces shapes.
    """

    times: tuple[float, ...]
    states: tuple[SimplexVector, ...]
    rates: tuple[SimplexVector, ...] | None = None

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        object.__setattr__(self, "times", times)
        states = tuple(self.states)
        object.__setattr__(self, "states", states)
        if len(times) < 2:
            raise DomainError("a path grid needs at least two times")
        if len(states) != len(times):
            raise DomainError(
                f"{len(times)} times but {len(states)} states")
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise DomainError("times must be strictly increasing")
        if times[0] < 0.0:
            raise DomainError("times must start at or after 0")
        cap = states[0].capacity_index
        for s in states:
            if s.capacity_index != cap:
                raise DomainError("states disagree on capacity index")
        if self.rates is not None:
            rates = tuple(self.rates)
            object.__setattr__(self, "rates", rates)
            if len(rates) != len(times) - 1:
                raise DomainError(
                    f"{len(times)} times need {len(times) - 1} rate "
                    f"vectors, got {len(rates)}")
            for r in rates:
                if r.capacity_index != cap:
                    raise DomainError("rates disagree on capacity index")

    @property
    def capacity_index(self) -> int:
        return self.states[0].capacity_index

    def psi_grid(self) -> list[tuple[float, ...]]:
        return [s.psi() for s in self.states]


@dataclass(frozen=True)
class DecompositionPiece:
    """One irreducible piece of a reducible endpoint constraint.

    constraint: the re-indexed standalone subproblem (its beta is the
    piece's own throw budget, balls absorbed per piece urn).
    urn_mass: fraction of the original urns in this piece.
    level_offset: original occupancy level of the piece's level 0.
    """

    constraint: EndpointConstraint
    urn_mass: float
    level_offset: int


GammaCallable = Callable[[float], SimplexVector]
