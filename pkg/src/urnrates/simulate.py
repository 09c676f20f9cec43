"""Monte Carlo simulation of the occupancy Markov chain.

Throw r = floor(beta * n) balls one at a time into n urns; each
throw strikes a uniformly random urn, so the struck occupancy
category j is drawn with probability (count at level j) / n and one
urn moves j -> j + 1 with the overflow bucket absorbing. Initial
occupancies come from rounding alpha * n to integers (largest
remainder, ties to the lower level), which keeps the initial state
deterministic.

Reproducibility contract (pinned so recorded outputs stay portable):
trial k derives its stream as PCG64(SeedSequence((seed, k))) and
consumes exactly one double per throw. Identical (seed, trial) give
identical trajectories on either kernel lane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernel
from .errors import DomainError
from .types import SimplexVector

__all__ = ["SimConfig", "SimResult", "simulate", "round_initial_counts",
           "throw_count", "level_threshold"]

_CHUNK = 4096


def throw_count(beta: float, n: int) -> int:
    """floor(beta * n), robust to the float image of a decimal beta.

    0.3 * 10 evaluates to 2.999...96 in binary floating point; the
    mathematical floor of the decimal product is wanted, so a 1e-9
    slack absorbs the representation error.
    """
    return int(math.floor(beta * n + 1e-9))


def level_threshold(fraction: float, n: int) -> int:
    """Smallest integer count m with m / n >= fraction (lattice-safe).

    Event predicates should compare integer counts against integer
    thresholds; ceil(fraction * n) straight off floats misrounds
    exact boundaries (0.08 * 50 -> ceil 5 instead of 4).
    """
    return int(math.ceil(fraction * n - 1e-9))


def round_initial_counts(alpha: SimplexVector, n: int) -> np.ndarray:
    """Largest-remainder rounding of alpha * n to integers summing to n."""
    raw = [a * n for a in alpha.entries]
    base = [int(math.floor(x + 1e-9)) for x in raw]
    short = n - sum(base)
    if short < 0:
        raise DomainError("initial rounding exceeded the urn count")
    # distribute the shortfall to the largest fractional parts,
    # breaking ties toward lower levels
    order = sorted(range(len(raw)),
                   key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return np.array(base, dtype=np.int64)


@dataclass(frozen=True)
class SimConfig:
    """Simulation job description.

    n: urn count; beta: throws per urn (r = floor(beta * n));
    alpha: initial occupancy fractions (its capacity index fixes the
    tracked levels); seed: 64-bit base seed; trials: number of
    independent chains; snapshot_times: optional increasing times in
    [0, beta] at which to record the state (time t corresponds to
    round(t * n) throws).
    """

    n: int
    beta: float
    alpha: SimplexVector
    seed: int
    trials: int
    snapshot_times: tuple[float, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("need at least one urn")
        if self.trials < 1:
            raise DomainError("need at least one trial")
        if self.beta < 0:
            raise DomainError("negative throw budget")
        if not 0 <= self.seed < 2 ** 64:
            raise DomainError("seed must fit in 64 bits")
        times = self.snapshot_times
        if any(t < -1e-12 or t > self.beta + 1e-12 for t in times):
            raise DomainError("snapshot times must lie in [0, beta]")
        if any(b > a for a, b in zip(times[1:], times)):
            raise DomainError("snapshot times must be nondecreasing")

    @property
    def throws(self) -> int:
        return throw_count(self.beta, self.n)


@dataclass(frozen=True)
class SimResult:
    """Terminal counts (trials x levels) and optional snapshots."""

    config: SimConfig
    counts: np.ndarray
    snapshot_throws: tuple[int, ...]
    snapshots: np.ndarray | None

    @property
    def fractions(self) -> np.ndarray:
        return self.counts / self.config.n

    def mean_fractions(self) -> np.ndarray:
        return self.counts.mean(axis=0) / self.config.n

    def event_count(self, predicate) -> int:
        """Trials whose terminal counts satisfy the predicate.

        The predicate receives (counts matrix, n) and returns a
        boolean vector; build thresholds with level_threshold to
        stay on the integer lattice.
        """
        hits = np.asarray(predicate(self.counts, self.config.n))
        return int(hits.sum())


def simulate(cfg: SimConfig, chunk_size: int = _CHUNK) -> SimResult:
    """Run cfg.trials independent chains on the active kernel lane."""
    init = round_initial_counts(cfg.alpha, cfg.n)
    r = cfg.throws
    snap_ts = sorted({min(r, max(0, int(round(t * cfg.n))))
                      for t in cfg.snapshot_times})
    ts = np.array(snap_ts, dtype=np.int64)
    levels = len(init)
    finals = np.empty((cfg.trials, levels), dtype=np.int64)
    snaps = (np.empty((cfg.trials, len(ts), levels), dtype=np.int64)
             if len(ts) else None)
    done = 0
    while done < cfg.trials:
        m = min(chunk_size, cfg.trials - done)
        f, s = kernel.run_block(cfg.seed, done, m, cfg.n, r, init, ts)
        finals[done:done + m] = f
        if snaps is not None:
            snaps[done:done + m] = s
        done += m
    return SimResult(cfg, finals, tuple(snap_ts), snaps)
