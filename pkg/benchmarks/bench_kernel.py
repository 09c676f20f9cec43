"""Timing comparison of the compiled and pure throw kernels.

Both lanes run the same trial blocks from the same seeds, so their
outputs must agree bit for bit; the script asserts that before it
prints any numbers. Usage:

    python3 benchmarks/bench_kernel.py --n 200 --beta 3 --trials 20000
"""

import argparse
import time

import numpy as np

from urnrates import available_lanes, kernel_info


def run(args):
    r = int(args.beta * args.n)
    levels = 8
    init = np.zeros(levels, dtype=np.int64)
    init[0] = args.n
    ts = np.array([], dtype=np.int64)
    lanes = available_lanes()

    results = {}
    timings = {}
    for name, fn in lanes.items():
        best = float("inf")
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            finals, _ = fn(args.seed, 0, args.trials, args.n, r,
                           init.copy(), ts.copy())
            best = min(best, time.perf_counter() - t0)
        results[name] = np.asarray(finals)
        timings[name] = best

    names = sorted(results)
    for a, b in zip(names, names[1:]):
        if not (results[a] == results[b]).all():
            raise SystemExit(f"lane outputs differ: {a} vs {b}")

    throws = args.trials * r
    print(f"active lane: {kernel_info()['lane']}   "
          f"n={args.n} r={r} trials={args.trials} "
          f"({throws:,} throws, best of {args.repeat})")
    print(f"{'lane':<10} {'seconds':>10} {'throws/sec':>14}")
    base = None
    for name in sorted(timings, key=timings.get):
        t = timings[name]
        if base is None:
            base = t
        print(f"{name:<10} {t:>10.4f} {throws / t:>14,.0f}"
              + ("" if t == base else f"   ({t / base:.1f}x slower)"))


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=200, help="urn count")
    p.add_argument("--beta", type=float, default=3.0,
                   help="throws per urn (r = floor(beta*n))")
    p.add_argument("--trials", type=int, default=20000,
                   help="independent trials per lane")
    p.add_argument("--repeat", type=int, default=3,
                   help="timed repetitions, best one kept")
    p.add_argument("--seed", type=int, default=0)
    run(p.parse_args())


if __name__ == "__main__":
    main()
