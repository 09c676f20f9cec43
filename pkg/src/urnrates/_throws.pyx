# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled throw kernel for the occupancy simulator.

One trial = r throws. Each throw consumes exactly one uniform double
u from the trial's generator and selects the occupancy category of
the struck urn by scanning cumulative level counts: the chosen j is
the first index with u * n < counts[0] + ... + counts[j]. An urn at
level j <= I moves to j + 1; the overflow bucket absorbs. The last
bucket also absorbs the (measure-zero, float-rounding) case where
u * n fails every comparison.

Stream law, shared verbatim with the pure lane: trial k uses
PCG64(SeedSequence((seed, k))) and draws one double per throw, in
throw order. The pure lane must replicate the u * n comparison
exactly (same IEEE double ops) for bit-identical trajectories.
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer, PyCapsule_IsValid
from numpy.random cimport bitgen_t

from numpy.random import PCG64, SeedSequence

cnp.import_array()

LANE = "compiled"


cdef inline void _one_trial(bitgen_t *rng, cnp.int64_t *counts, long n,
                            long r, long n_levels,
                            const cnp.int64_t *snap_ts, long n_snaps,
                            cnp.int64_t *snaps_out) noexcept nogil:
    cdef long throw, j, s = 0, k
    cdef double target
    cdef cnp.int64_t cum
    while s < n_snaps and snap_ts[s] == 0:
        for k in range(n_levels):
            snaps_out[s * n_levels + k] = counts[k]
        s += 1
    for throw in range(1, r + 1):
        target = rng.next_double(rng.state) * n
        cum = 0
        j = n_levels - 1
        for k in range(n_levels):
            cum += counts[k]
            if target < <double> cum:
                j = k
                break
        if j < n_levels - 1:
            counts[j] -= 1
            counts[j + 1] += 1
        while s < n_snaps and snap_ts[s] == throw:
            for k in range(n_levels):
                snaps_out[s * n_levels + k] = counts[k]
            s += 1


def run_block(object seed, long first_trial, long n_trials, long n, long r,
              init_counts, snapshot_ts):
    """Run trials [first_trial, first_trial + n_trials) of the chain.

    init_counts: int64 level counts (length I + 2, summing to n).
    snapshot_ts: sorted int64 throw indices in [0, r] at which to
    record the state (after that many throws).

    Returns (finals, snaps): int64 arrays of shape
    (n_trials, I + 2) and (n_trials, len(snapshot_ts), I + 2).
    """
    cdef cnp.int64_t[::1] init = np.ascontiguousarray(init_counts,
                                                      dtype=np.int64)
    cdef cnp.int64_t[::1] ts = np.ascontiguousarray(snapshot_ts,
                                                    dtype=np.int64)
    cdef long n_levels = init.shape[0]
    cdef long n_snaps = ts.shape[0]
    finals_arr = np.empty((n_trials, n_levels), dtype=np.int64)
    snaps_arr = np.empty((n_trials, n_snaps, n_levels), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] finals = finals_arr
    cdef cnp.int64_t[:, :, ::1] snaps = snaps_arr
    cdef cnp.int64_t[::1] work = np.empty(n_levels, dtype=np.int64)
    cdef bitgen_t *rng
    cdef const cnp.int64_t *ts_ptr = NULL
    cdef cnp.int64_t *snap_base = NULL
    cdef long t, k
    cdef object bg, capsule
    if n_snaps > 0:
        ts_ptr = &ts[0]
    for t in range(n_trials):
        bg = PCG64(SeedSequence((seed, first_trial + t)))
        capsule = bg.capsule
        if not PyCapsule_IsValid(capsule, "BitGenerator"):
            raise RuntimeError("unexpected BitGenerator capsule layout")
        rng = <bitgen_t *> PyCapsule_GetPointer(capsule, "BitGenerator")
        for k in range(n_levels):
            work[k] = init[k]
        if n_snaps > 0:
            snap_base = &snaps[t, 0, 0]
        with nogil:
            _one_trial(rng, &work[0], n, r, n_levels,
                       ts_ptr, n_snaps, snap_base)
        for k in range(n_levels):
            finals[t, k] = work[k]
    return finals_arr, snaps_arr
