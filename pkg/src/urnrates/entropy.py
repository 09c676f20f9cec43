"""Relative entropy and Poisson building blocks.

Everything downstream (rates, twist systems, extremal costs) reduces
to relative entropies and Poisson head/tail sums. The sums are never
formed term by term when a regularized incomplete-gamma identity
exists: for Y ~ Poisson(t),

    P(Y > N)        = gammainc(N+1, t)      (lower regularized)
    P(Y <= N)       = gammaincc(N+1, t)     (upper regularized)
    sum_{i>N} i P_i(t) = t * P(Y >= N) = t * gammainc(N, t)

These forms are stable for t up to 1e4 and beyond, where the naive
partial sums lose digits to cancellation.

Conventions, used everywhere: 0*log(0/q) = 0 for any q >= 0, and
p*log(p/0) = +inf for p > 0.
"""

from __future__ import annotations

import math
from typing import Sequence

from scipy.special import gammainc, gammaincc, gammaln

from .errors import DomainError
from .types import CountDistribution, SimplexVector

__all__ = [
    "poisson_log_pmf",
    "poisson_pmf",
    "poisson_head_mass",
    "poisson_tail_mass",
    "poisson_tail_mean",
    "relative_entropy",
]


def poisson_log_pmf(i: int, rate: float) -> float:
    """log of the Poisson(rate) pmf at count i, computed in log space."""
    if i < 0 or i != int(i):
        raise DomainError(f"count must be a nonnegative integer, got {i!r}")
    rate = float(rate)
    if not rate > 0.0 or not math.isfinite(rate):
        raise DomainError(f"rate must be positive and finite, got {rate!r}")
    i = int(i)
    return -rate + i * math.log(rate) - float(gammaln(i + 1))


def poisson_pmf(i: int, rate: float) -> float:
    """Poisson(rate) pmf, rate = 0 allowed (point mass at 0)."""
    if rate == 0.0:
        return 1.0 if i == 0 else 0.0
    return math.exp(poisson_log_pmf(i, rate))


def poisson_tail_mass(n: int, rate: float) -> float:
    """P(Y > n) for Y ~ Poisson(rate); n = -1 gives 1."""
    if n < 0:
        return 1.0
    return float(gammainc(n + 1, rate))


def poisson_head_mass(n: int, rate: float) -> float:
    """P(Y <= n) for Y ~ Poisson(rate); n = -1 gives 0."""
    if n < 0:
        return 0.0
    return float(gammaincc(n + 1, rate))


def poisson_tail_mean(n: int, rate: float) -> float:
    """sum_{i > n} i * P_i(rate); equals rate * P(Y >= n)."""
    if n <= 0:
        return float(rate)
    return float(rate) * float(gammainc(n, rate))


def _entropy_term(p: float, q: float) -> float:
    if p == 0.0:
        return 0.0
    if q <= 0.0:
        return math.inf
    return p * math.log(p / q)


def _simplex_entropy(p: Sequence[float], q: Sequence[float]) -> float:
    if len(p) != len(q):
        raise DomainError(
            f"length mismatch: {len(p)} vs {len(q)} entries")
    terms = []
    for pi, qi in zip(p, q):
        t = _entropy_term(pi, qi)
        if t == math.inf:
            return math.inf
        terms.append(t)
    # fsum keeps the near-cancelling positive/negative parts honest;
    # the result can be a tiny negative float for p ~ q, floor it.
    value = math.fsum(terms)
    return max(value, 0.0) if value > -1e-15 else value


def _count_entropy(p: CountDistribution, q: CountDistribution) -> float:
    n_common = max(p.truncation, q.truncation)
    p_head = p.materialized_head(n_common)
    q_head = q.materialized_head(n_common)
    terms = []
    for pi, qi in zip(p_head, q_head):
        t = _entropy_term(pi, qi)
        if t == math.inf:
            return math.inf
        terms.append(t)
    if p.tail_scale > 0.0:
        if q.tail_scale == 0.0:
            return math.inf
        # sum_{i>N} C_p P_i(a) [log(C_p/C_q) + (b - a) + i log(a/b)]
        # with a = p.tail_rate, b = q.tail_rate.
        a, b = p.tail_rate, q.tail_rate
        t_mass = poisson_tail_mass(n_common, a)
        t_mean = poisson_tail_mean(n_common, a)
        const = math.log(p.tail_scale / q.tail_scale) + (b - a)
        slope = math.log(a / b)
        terms.append(p.tail_scale * (const * t_mass + slope * t_mean))
    value = math.fsum(terms)
    return max(value, 0.0) if value > -1e-12 else value


def relative_entropy(p, q) -> float:
    """D(p || q), extended-real valued, total on its domain.

    Accepts a pair of SimplexVector (or plain same-length sequences),
    or a pair of CountDistribution (tails handled analytically).
    """
    if isinstance(p, CountDistribution) or isinstance(q, CountDistribution):
        if not (isinstance(p, CountDistribution)
                and isinstance(q, CountDistribution)):
            raise DomainError(
                "cannot mix CountDistribution with a plain vector")
        return _count_entropy(p, q)
    p_seq = p.entries if isinstance(p, SimplexVector) else tuple(p)
    q_seq = q.entries if isinstance(q, SimplexVector) else tuple(q)
    return _simplex_entropy(p_seq, q_seq)
