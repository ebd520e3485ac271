"""Benchmark the compiled assignment kernel against the numpy fallback.

Times both backends on random derangement instances (sentinel diagonal)
of increasing size, checks that they return identical assignments, and
prints a table with the per-solve medians and the speedup ratio.

Run from the repository root:

    python3 benchmarks/bench_lap.py --sizes 64,128,256,512 --repeats 5
"""

import argparse
import sys
import time

import numpy as np

from morphidx._lap_fallback import lap_solve as fallback_solve
from morphidx.pairing import SENTINEL

try:
    from morphidx._lap import lap_solve as compiled_solve
except ImportError:
    compiled_solve = None


def make_instance(n, rng):
    costs = rng.random((n, n)) * 10.0
    np.fill_diagonal(costs, SENTINEL)
    return costs


def time_solver(solver, instances, repeats):
    """Median wall time per solve, over `repeats` passes of all instances."""
    passes = []
    for _ in range(repeats):
        start = time.perf_counter()
        for costs in instances:
            solver(costs)
        passes.append((time.perf_counter() - start) / len(instances))
    return float(np.median(passes))


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="32,64,128,256,512",
                        help="comma-separated matrix sizes")
    parser.add_argument("--instances", type=int, default=3,
                        help="random instances per size")
    parser.add_argument("--repeats", type=int, default=5,
                        help="timing passes per backend (median reported)")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    if compiled_solve is None:
        print("compiled backend unavailable; build the extension first",
              file=sys.stderr)
        return 1

    sizes = [int(s) for s in args.sizes.split(",")]
    rng = np.random.default_rng(args.seed)

    print(f"{'n':>6} {'compiled [ms]':>14} {'fallback [ms]':>14} {'speedup':>8}")
    for n in sizes:
        instances = [make_instance(n, rng) for _ in range(args.instances)]
        for costs in instances:
            a = compiled_solve(costs)
            b = fallback_solve(costs)
            if not np.array_equal(a, b):
                print(f"backend mismatch at n={n}", file=sys.stderr)
                return 1
        t_c = time_solver(compiled_solve, instances, args.repeats)
        t_f = time_solver(fallback_solve, instances, args.repeats)
        print(f"{n:>6} {t_c * 1e3:>14.3f} {t_f * 1e3:>14.3f} {t_f / t_c:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
