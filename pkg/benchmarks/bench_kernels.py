"""Timing comparison of the compiled and pure-numpy kernel paths.

Runs each accelerated kernel on a sized workload under both
implementations, checks that they agree, and prints a timing table.
The compiled path is warmed once before timing so JIT compilation is
not billed to the measurement.

Usage: python benchmarks/bench_kernels.py [--quick]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from sensemim import accel
from sensemim.clustering import cosine_distance_matrix


def best_of(fn, repeats=3):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - start)
    return min(times), result


def run_both(name, fn, agree, repeats=3):
    """Time fn under each path; returns a table row."""
    if not accel.HAS_NUMBA:
        accel.USE_NUMBA = False
        t_np, _ = best_of(fn, repeats)
        return (name, float("nan"), t_np, float("nan"), "numba unavailable")
    accel.USE_NUMBA = True
    fn()  # warm the JIT cache
    t_nb, out_nb = best_of(fn, repeats)
    accel.USE_NUMBA = False
    t_np, out_np = best_of(fn, repeats)
    accel.USE_NUMBA = True
    status = "ok" if agree(out_nb, out_np) else "MISMATCH"
    return (name, t_nb, t_np, t_np / t_nb, status)


def upgma_workload(n):
    rng = np.random.default_rng(11)
    vectors = rng.normal(size=(n, 32))
    dist = cosine_distance_matrix(vectors)
    return lambda: accel.upgma_merge_sequence(dist)


def upgma_agree(a, b):
    # merge sequences must be bit-identical across paths; heights too
    return all(np.array_equal(x, y) for x, y in zip(a, b))


def bcubed_workload(n, senses_gold=12, senses_sys=9):
    rng = np.random.default_rng(12)
    wg = rng.dirichlet(np.ones(senses_gold), size=n)
    ws = rng.dirichlet(np.ones(senses_sys), size=n)
    return lambda: accel.bcubed_pair_sums(wg, ws)


def bcubed_agree(a, b):
    # summation order differs between paths; tolerance matches the caller's
    return all(np.allclose(x, y, atol=1e-12) for x, y in zip(a, b))


def distinct_workload(m, cells):
    rng = np.random.default_rng(13)
    codes = rng.integers(0, cells, size=m, dtype=np.int64)
    return lambda: accel.count_distinct(codes)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true", help="smaller workloads")
    args = parser.parse_args()

    if args.quick:
        workloads = [
            ("upgma n=120", upgma_workload(120), upgma_agree),
            ("bcubed n=400", bcubed_workload(400), bcubed_agree),
            ("distinct m=2e5", distinct_workload(200_000, 50_000), lambda a, b: a == b),
        ]
    else:
        workloads = [
            ("upgma n=400", upgma_workload(400), upgma_agree),
            ("bcubed n=1500", bcubed_workload(1500), bcubed_agree),
            ("distinct m=2e6", distinct_workload(2_000_000, 500_000), lambda a, b: a == b),
        ]

    saved = accel.USE_NUMBA
    print(f"{'kernel':<16} {'numba (s)':>10} {'numpy (s)':>10} {'speedup':>8}  agreement")
    try:
        for name, fn, agree in workloads:
            row = run_both(name, fn, agree)
            print(f"{row[0]:<16} {row[1]:>10.4f} {row[2]:>10.4f} {row[3]:>7.1f}x  {row[4]}")
    finally:
        accel.USE_NUMBA = saved
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
