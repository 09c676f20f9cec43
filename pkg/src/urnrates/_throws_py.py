"""Pure-numpy throw kernel, the fallback twin of the compiled lane.

Consumes the random stream identically to the compiled kernel: trial
k uses PCG64(SeedSequence((seed, k))) and draws one double per throw
in throw order (a single Generator.random(r) call pulls exactly r
consecutive next_double values). Category selection replicates the
compiled comparison u * n < cumulative counts with the same IEEE
double operations, so trajectories are bit-identical across lanes.

Vectorizes across the trials of a block (the chain is sequential in
throws but independent across trials); per-throw cost is O(block
size * levels) numpy work instead of a C loop.
"""

from __future__ import annotations

import numpy as np
from numpy.random import PCG64, Generator, SeedSequence

LANE = "pure"


def run_block(seed, first_trial, n_trials, n, r, init_counts, snapshot_ts):
    """Same contract as the compiled lane's run_block."""
    init = np.ascontiguousarray(init_counts, dtype=np.int64)
    ts = np.ascontiguousarray(snapshot_ts, dtype=np.int64)
    n_levels = init.shape[0]
    n_snaps = ts.shape[0]
    snaps = np.empty((n_trials, n_snaps, n_levels), dtype=np.int64)

    u = np.empty((n_trials, r), dtype=np.float64)
    for t in range(n_trials):
        gen = Generator(PCG64(SeedSequence((seed, first_trial + t))))
        u[t, :] = gen.random(r)

    counts = np.tile(init, (n_trials, 1))
    rows = np.arange(n_trials)
    s = 0
    while s < n_snaps and ts[s] == 0:
        snaps[:, s, :] = counts
        s += 1
    for throw in range(1, r + 1):
        target = u[:, throw - 1] * n
        cum = np.cumsum(counts, axis=1)
        # first j with target < cum[j]; a full miss (float rounding)
        # falls into the absorbing last bucket
        j = np.minimum((target[:, None] >= cum).sum(axis=1), n_levels - 1)
        movable = j < n_levels - 1
        hit_rows = rows[movable]
        hit = j[movable]
        counts[hit_rows, hit] -= 1
        counts[hit_rows, hit + 1] += 1
        while s < n_snaps and ts[s] == throw:
            snaps[:, s, :] = counts
            s += 1
    return counts, snaps
