"""Independent ground truth for the closed-form solvers.

Three unrelated routes, kept free of the solver machinery on
purpose:

  * exact finite-n combinatorics for the empty-urn count
    (inclusion-exclusion, with exact big-integer escalation when the
    alternating sum cancels too much for floats);
  * direct minimization of the relative-entropy objective over a
    truncated support by cyclic Bregman projections (no knowledge of
    the tilted-family closed forms);
  * Monte Carlo frequency estimates on the exponent scale with
    Wilson intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from .errors import (DomainError, InfeasibleTruncation, PrecisionLoss,
                     SolverFailure, ZeroHits)
from .entropy import poisson_pmf, poisson_tail_mass
from .simulate import SimConfig, simulate, throw_count
from .types import EndpointConstraint, default_truncation

__all__ = [
    "exact_empty_urn_pmf", "exact_empty_urn_tail",
    "TruncatedProgram", "entropy_min_oracle", "endpoint_program",
    "ExponentEstimate", "empirical_exponent",
]

# estimated relative error above which the float route is replaced
# by exact big-integer arithmetic, and above which the PrecisionLoss
# flag is attached to the result
_ESCALATE_AT = 1e-12
_FLAG_AT = 1e-6
_EPS = 2.0 ** -52


def _log_comb(a: int, b: int) -> float:
    return (math.lgamma(a + 1) - math.lgamma(b + 1)
            - math.lgamma(a - b + 1))


def _float_alternating(log_terms, signs):
    """(value, metric): scaled compensated sum of signed exp(log) terms.

    metric estimates the relative error lost to cancellation:
    (sum of magnitudes / |signed sum|) * machine epsilon.
    """
    if not log_terms:
        return 0.0, 0.0
    top = max(log_terms)
    if top == -math.inf:
        return 0.0, 0.0
    scaled = [s * math.exp(lt - top) for lt, s in zip(log_terms, signs)]
    signed = math.fsum(scaled)
    magnitude = math.fsum(abs(x) for x in scaled)
    if signed <= 0.0:
        return 0.0, math.inf
    return math.exp(top) * signed, (magnitude / signed) * _EPS


def _finish(numer: int, n: int, r: int, metric: float, float_value: float,
            want_log: bool, with_diagnostics: bool):
    flag = None
    if metric > _ESCALATE_AT:
        if numer <= 0:
            value = -math.inf if want_log else 0.0
        elif want_log:
            value = math.log(numer) - r * math.log(n)
        else:
            value = float(Fraction(numer, n ** r))
        if metric > _FLAG_AT:
            flag = PrecisionLoss(cancellation=metric, escalated=True)
    else:
        if want_log:
            value = math.log(float_value) if float_value > 0 else -math.inf
        else:
            value = float_value
    return (value, flag) if with_diagnostics else value


def exact_empty_urn_pmf(n: int, r: int, m: int, *, log: bool = False,
                        with_diagnostics: bool = False):
    """P(exactly m of n urns are empty after r uniform throws).

    Inclusion-exclusion over the m empty urns:
    C(n, m) * sum_j (-1)^j C(n-m, j) ((n-m-j)/n)^r. Evaluated by a
    compensated log-space sum; when the estimated cancellation error
    exceeds 1e-12 relative the value is recomputed exactly in
    big-integer arithmetic (the returned float is then correctly
    rounded), and above 1e-6 a PrecisionLoss flag is attached when
    with_diagnostics is set. log=True returns the log-probability.
    """
    if not (0 <= m <= n) or r < 0:
        raise DomainError("need 0 <= m <= n and r >= 0")
    log_terms, signs = [], []
    for j in range(n - m + 1):
        left = n - m - j
        if left == 0 and r > 0:
            continue
        lt = (_log_comb(n, m) + _log_comb(n - m, j)
              + (r * (math.log(left) - math.log(n)) if r > 0 else 0.0))
        log_terms.append(lt)
        signs.append(1.0 if j % 2 == 0 else -1.0)
    float_value, metric = _float_alternating(log_terms, signs)
    numer = None
    if metric > _ESCALATE_AT:
        numer = math.comb(n, m) * sum(
            (-1) ** j * math.comb(n - m, j) * (n - m - j) ** r
            for j in range(n - m + 1))
    return _finish(numer, n, r, metric, float_value, log, with_diagnostics)


def exact_empty_urn_tail(n: int, r: int, m0: int, *, log: bool = False,
                         with_diagnostics: bool = False):
    """P(at least m0 of n urns are empty after r uniform throws).

    Single alternating sum (the at-least form of inclusion-
    exclusion): sum_{j >= m0} (-1)^(j-m0) C(j-1, m0-1) C(n, j)
    ((n-j)/n)^r, with the same float/exact escalation as the pmf.
    Far cheaper than summing per-m pmfs when only a tail is needed.
    """
    if not (0 <= m0 <= n) or r < 0:
        raise DomainError("need 0 <= m0 <= n and r >= 0")
    if m0 == 0:
        return (0.0 if log else 1.0, None) if with_diagnostics \
            else (0.0 if log else 1.0)
    log_terms, signs = [], []
    for j in range(m0, n + 1):
        if n - j == 0 and r > 0:
            continue
        lt = (_log_comb(j - 1, m0 - 1) + _log_comb(n, j)
              + (r * (math.log(n - j) - math.log(n)) if r > 0 else 0.0))
        log_terms.append(lt)
        signs.append(1.0 if (j - m0) % 2 == 0 else -1.0)
    float_value, metric = _float_alternating(log_terms, signs)
    numer = None
    if metric > _ESCALATE_AT:
        numer = sum(
            (-1) ** (j - m0) * math.comb(j - 1, m0 - 1) * math.comb(n, j)
            * (n - j) ** r
            for j in range(m0, n + 1))
    return _finish(numer, n, r, metric, float_value, log, with_diagnostics)


# ---------------------------------------------------------------------------
# brute-force entropy minimization over a truncated support


@dataclass(frozen=True)
class TruncatedProgram:
    """Linear-equality-constrained entropy program on a finite support.

    Minimize sum_k class_weights[k] * D(pi_(k) || Poisson(reference_rate))
    over per-class probability vectors pi_(k) on {0..support_bound},
    subject to rows . flat(pi) = rhs. Per-class unit mass is implicit
    and must not appear among the rows. Variables are flattened
    class-major: index = class * (support_bound + 1) + count.
    """

    class_weights: tuple[float, ...]
    support_bound: int
    reference_rate: float
    rows: tuple[tuple[float, ...], ...]
    rhs: tuple[float, ...]

    def __post_init__(self):
        if not self.class_weights or min(self.class_weights) <= 0:
            raise DomainError("class weights must be positive")
        if self.support_bound < 0:
            raise DomainError("support bound must be nonnegative")
        if self.reference_rate < 0:
            raise DomainError("reference rate must be nonnegative")
        tail = poisson_tail_mass(self.support_bound, self.reference_rate)
        if tail > 1e-12:
            raise InfeasibleTruncation(
                f"support bound {self.support_bound} leaves reference tail "
                f"mass {tail:.3e} > 1e-12")
        width = len(self.class_weights) * (self.support_bound + 1)
        if len(self.rows) != len(self.rhs):
            raise DomainError("rows and rhs must align")
        for row in self.rows:
            if len(row) != width:
                raise DomainError(f"constraint row width {len(row)} != "
                                  f"variable count {width}")

    @property
    def n_classes(self) -> int:
        return len(self.class_weights)

    @property
    def width(self) -> int:
        return self.n_classes * (self.support_bound + 1)


def endpoint_program(c: EndpointConstraint,
                     support_bound: int | None = None) -> TruncatedProgram:
    """Standard endpoint program: one class per positive initial level.

    Rows: for every level i <= I the aggregate
    sum_k alpha_k pi_{k, i-k} = omega_i, plus ball conservation
    sum_k alpha_k mean(pi_(k)) = beta. The overflow target is implied
    by the unit masses.
    """
    if c.alpha.overflow > 0:
        raise DomainError("initial overflow urns are not supported; "
                          "extend the capacity index instead")
    cap = c.capacity_index
    classes = [k for k in range(cap + 1) if c.alpha.entries[k] > 0]
    if not classes:
        raise DomainError("no initial urns")
    weights = tuple(c.alpha.entries[k] for k in classes)
    bound = support_bound if support_bound is not None \
        else default_truncation(c.beta)
    width = len(classes) * (bound + 1)
    rows, rhs = [], []
    for i in range(cap + 1):
        row = [0.0] * width
        for pos, k in enumerate(classes):
            j = i - k
            if 0 <= j <= bound:
                row[pos * (bound + 1) + j] = weights[pos]
        rows.append(tuple(row))
        rhs.append(c.omega.entries[i])
    row = [0.0] * width
    for pos in range(len(classes)):
        for j in range(bound + 1):
            row[pos * (bound + 1) + j] = weights[pos] * j
    rows.append(tuple(row))
    rhs.append(c.beta)

    # a budget with no slack forces every overflowing urn to stop at
    # exactly cap+1 balls: the excess-above-minimum functional
    # sum_k alpha_k sum_{j > cap-k} (j - (cap+1-k)) pi_k(j) equals
    # have - need = 0 on the whole feasible set, and its coefficients
    # are nonnegative, so one homogeneous row lets the presolve pin
    # every coordinate past cap+1-k instead of the projections
    # chasing that boundary asymptotically
    need = c.omega.head_mean() + (cap + 1) * c.omega.overflow
    have = c.alpha.head_mean() + c.beta
    if abs(need - have) <= 1e-9 * max(1.0, need):
        row = [0.0] * width
        for pos, k in enumerate(classes):
            stop = cap + 1 - k
            for j in range(stop + 1, bound + 1):
                row[pos * (bound + 1) + j] = weights[pos] * (j - stop)
        if any(v != 0.0 for v in row):
            rows.append(tuple(row))
            rhs.append(0.0)

    # a target with no overflow mass keeps every urn at or below the
    # capacity index; same story, one homogeneous row pins the
    # above-capacity coordinates outright
    if c.omega.overflow <= 1e-12:
        row = [0.0] * width
        for pos, k in enumerate(classes):
            for j in range(cap - k + 1, bound + 1):
                row[pos * (bound + 1) + j] = weights[pos]
        if any(v != 0.0 for v in row):
            rows.append(tuple(row))
            rhs.append(0.0)
    return TruncatedProgram(weights, bound, c.beta, tuple(rows), tuple(rhs))


def _project_row(pi, w, c, b, lam0):
    """KL projection of pi onto {c . pi = b}: pi <- pi exp(lam c / w)."""
    active = c != 0.0
    if not active.any():
        if abs(b) > 1e-11:
            raise InfeasibleTruncation("empty constraint with nonzero rhs")
        return pi, 0.0
    ca = c[active]
    wa = w[active]
    base = pi[active]

    def g(lam):
        return float(ca @ (base * np.exp(np.minimum(lam * ca / wa, 600.0)))) - b

    lo = hi = lam0
    glo = ghi = g(lam0)
    step = 1.0
    for _ in range(200):
        if glo > 0:
            lo -= step
            glo = g(lo)
        elif ghi < 0:
            hi += step
            ghi = g(hi)
        else:
            break
        step *= 2.0
    else:
        raise InfeasibleTruncation(
            "constraint unreachable within the truncated support")
    if glo == 0.0:
        lam = lo
    elif ghi == 0.0:
        lam = hi
    else:
        lam = brentq(g, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
    out = pi.copy()
    out[active] = base * np.exp(np.minimum(lam * ca / wa, 600.0))
    return out, lam


def _presolve_mask(rows, rhs, n_cls, bound, width):
    """Interval bound propagation over the equality system.

    Every variable is a probability within its class, so it starts in
    the box [0, 1]. Each equality row c . pi = b tightens the box:
    holding the other variables at their interval ends bounds each one
    in turn. Iterating to a fixpoint pins vertex-supported classes
    exactly (upper bounds collapsing to zero), which the multiplicative
    updates would otherwise approach only asymptotically. Returns the
    mask of variables allowed to stay positive; raises
    InfeasibleTruncation when the box empties.
    """
    lo = np.zeros(width)
    ub = np.ones(width)
    all_rows = list(rows)
    all_rhs = list(rhs)
    for k in range(n_cls):
        row = np.zeros(width)
        row[k * (bound + 1):(k + 1) * (bound + 1)] = 1.0
        all_rows.append(row)
        all_rhs.append(1.0)
    for _ in range(200):
        changed = False
        for row, b in zip(all_rows, all_rhs):
            nz = np.nonzero(row)[0]
            if nz.size == 0:
                if abs(b) > 1e-11:
                    raise InfeasibleTruncation(
                        f"empty constraint with rhs {b:.6g}")
                continue
            pos = row > 0.0
            neg = row < 0.0
            # stale sums after an in-loop update only loosen the next
            # bound, never tighten it, so monotonicity is preserved
            sum_lo = float(row[pos] @ lo[pos] + row[neg] @ ub[neg])
            sum_hi = float(row[pos] @ ub[pos] + row[neg] @ lo[neg])
            for v in nz:
                cv = row[v]
                if cv > 0.0:
                    rest_lo = sum_lo - cv * lo[v]
                    rest_hi = sum_hi - cv * ub[v]
                    new_lo = (b - rest_hi) / cv
                    new_ub = (b - rest_lo) / cv
                else:
                    rest_lo = sum_lo - cv * ub[v]
                    rest_hi = sum_hi - cv * lo[v]
                    new_lo = (b - rest_lo) / cv
                    new_ub = (b - rest_hi) / cv
                if new_lo > lo[v] + 1e-14:
                    lo[v] = new_lo
                    changed = True
                if new_ub < ub[v] - 1e-14:
                    ub[v] = new_ub
                    changed = True
                if lo[v] > ub[v] + 1e-9:
                    raise InfeasibleTruncation(
                        "bound propagation emptied the feasible box")
        if not changed:
            break
    return ub > 1e-12


def entropy_min_oracle(prog: TruncatedProgram, *, max_cycles: int = 5000,
                       residual_tol: float = 1e-11,
                       kkt_tol: float = 1e-10):
    """Minimize the program by cyclic Bregman (I-) projections.

    Multiplicative updates keep iterates positive automatically;
    each equality is enforced in turn by a one-dimensional root
    solve, with per-class renormalization closing every cycle.
    Convergence is certified two ways before returning: constraint
    residuals below residual_tol and stationarity of the gradient on
    the support (least-squares fit onto the constraint rows) below
    kkt_tol. Returns (value, per-class argmin arrays).
    """
    n_cls = prog.n_classes
    bound = prog.support_bound
    width = prog.width
    w = np.repeat(np.asarray(prog.class_weights), bound + 1)
    q = np.tile(np.array([poisson_pmf(j, prog.reference_rate)
                          for j in range(bound + 1)]), n_cls)

    rows = [np.asarray(r, dtype=float) for r in prog.rows]
    rhs = list(prog.rhs)
    mask = _presolve_mask(rows, rhs, n_cls, bound, width)
    keep_rows, keep_rhs = [], []
    for row, b in zip(rows, rhs):
        active = (row != 0.0) & mask
        if not active.any():
            if abs(b) > 1e-10:
                raise InfeasibleTruncation(
                    f"constraint with rhs {b:.6g} lost all its variables")
            continue
        keep_rows.append(row)
        keep_rhs.append(b)
    pi = np.where(mask, q, 0.0)
    for k in range(n_cls):
        seg = slice(k * (bound + 1), (k + 1) * (bound + 1))
        mass = pi[seg].sum()
        if mass <= 0:
            raise InfeasibleTruncation(
                f"class {k} has no admissible support")
        pi[seg] /= mass

    lams = [0.0] * len(keep_rows)
    residual = math.inf
    for _ in range(max_cycles):
        for idx, (row, b) in enumerate(zip(keep_rows, keep_rhs)):
            pi, lams[idx] = _project_row(pi, w, row, b, lams[idx])
        for k in range(n_cls):
            seg = slice(k * (bound + 1), (k + 1) * (bound + 1))
            pi[seg] /= pi[seg].sum()
        residual = max((abs(float(row @ pi) - b)
                        for row, b in zip(keep_rows, keep_rhs)),
                       default=0.0)
        if residual <= residual_tol:
            break
    if residual > residual_tol:
        if residual > 1e-8:
            raise InfeasibleTruncation(
                f"projections stalled at residual {residual:.3e}")
        raise SolverFailure("entropy projections did not reach tolerance",
                            residual=residual)

    support = pi > 0.0
    grad = np.zeros(width)
    grad[support] = w[support] * (np.log(pi[support] / q[support]) + 1.0)
    mass_rows = []
    for k in range(n_cls):
        row = np.zeros(width)
        row[k * (bound + 1):(k + 1) * (bound + 1)] = 1.0
        mass_rows.append(row)
    a_mat = np.array([r[support] for r in (keep_rows + mass_rows)]).T
    sol, *_ = np.linalg.lstsq(a_mat, grad[support], rcond=None)
    kkt = float(np.abs(a_mat @ sol - grad[support]).max())
    if kkt > kkt_tol * max(1.0, float(np.abs(grad[support]).max())):
        raise SolverFailure("stationarity certificate failed",
                            residual=kkt)

    on = pi > 0.0
    value = float(np.sum(w[on] * pi[on] * np.log(pi[on] / q[on])))
    argmin = tuple(pi[k * (bound + 1):(k + 1) * (bound + 1)].copy()
                   for k in range(n_cls))
    return value, argmin


# ---------------------------------------------------------------------------
# Monte Carlo exponent estimates

_Z95 = 1.959963984540054


def _wilson(hits: int, trials: int) -> tuple[float, float]:
    z2 = _Z95 * _Z95
    denom = trials + z2
    center = (hits + z2 / 2.0) / denom
    half = _Z95 * math.sqrt(hits * (trials - hits) / trials + z2 / 4.0) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class ExponentEstimate:
    """-(1/n) log P estimate for one urn count, with a 95% interval."""

    n: int
    throws: int
    trials: int
    hits: int
    p_hat: float
    p_low: float
    p_high: float
    exponent: float
    exponent_low: float
    exponent_high: float
    zero_hits: ZeroHits | None = None


def empirical_exponent(cfg: SimConfig, event, n_list) -> list[ExponentEstimate]:
    """Estimate the decay exponent of a terminal event across urn counts.

    cfg supplies beta, alpha, seed, and trials; its n is ignored in
    favor of n_list. The same seed is reused for every n (common
    random numbers: the per-trial streams coincide, which stabilizes
    cross-n comparisons such as monotonicity checks). The event
    receives (integer count matrix, n) and returns a boolean vector;
    zero hits are reported through the zero_hits field, never as a
    silent infinity.
    """
    out = []
    for n in n_list:
        sub = SimConfig(n=n, beta=cfg.beta, alpha=cfg.alpha, seed=cfg.seed,
                        trials=cfg.trials)
        res = simulate(sub)
        hits = res.event_count(event)
        trials = cfg.trials
        p_low, p_high = _wilson(hits, trials)
        if hits == 0:
            bound = -math.log(p_high) / n
            out.append(ExponentEstimate(
                n, throw_count(cfg.beta, n), trials, 0, 0.0, p_low, p_high,
                math.inf, bound, math.inf,
                ZeroHits(n=n, trials=trials, exponent_lower_bound=bound)))
            continue
        p_hat = hits / trials
        out.append(ExponentEstimate(
            n, throw_count(cfg.beta, n), trials, hits, p_hat, p_low, p_high,
            -math.log(p_hat) / n,
            -math.log(p_high) / n,
            -math.log(p_low) / n if p_low > 0 else math.inf))
    return out
