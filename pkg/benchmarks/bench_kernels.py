"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run: python benchmarks/bench_kernels.py [--repeats 20] [--scale 1.0]

The numba variants are warmed up (compiled) before timing. Set
STABLESEQ_NO_NUMBA=1 to confirm the fallback path is the one dispatched.
"""

import argparse
import time

import numpy as np

from stableseq import accel, kernels


def time_call(func, *args, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        func(*args)
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0


def boxes(rng, n, p):
    lo = rng.uniform(0, 1, (n, p))
    hi = lo + rng.uniform(0.01, 1, (n, p))
    labels = rng.integers(0, 2, n).astype(np.int64)
    return lo, hi, labels


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=20)
    parser.add_argument("--scale", type=float, default=1.0, help="input size multiplier")
    args = parser.parse_args()
    rng = np.random.default_rng(0)
    s = args.scale

    print(f"dispatched backend: {accel.backend_name()}")
    if not accel.USE_NUMBA:
        print("numba unavailable or disabled; timing the numpy path only\n")

    cases = []

    n_paths = int(64 * s)
    p = int(40 * s)
    lo1, hi1, lab1 = boxes(rng, n_paths, p)
    lo2, hi2, lab2 = boxes(rng, n_paths, p)
    cases.append((
        f"path_cost_matrix ({n_paths}x{n_paths} paths, {p} features)",
        kernels.path_cost_matrix_numba,
        kernels.path_cost_matrix_numpy,
        (lo1, hi1, lab1, lo2, hi2, lab2, 1.0),
    ))

    m = int(300 * s)
    d = int(100 * s)
    A = rng.standard_normal((m, d))
    B = rng.standard_normal((m, d))
    cases.append((
        f"pairwise_sq_dists ({m}x{m} models, {d} dims)",
        kernels.pairwise_sq_dists_numba,
        kernels.pairwise_sq_dists_numpy,
        (A, B),
    ))

    n_rows = int(200_000 * s)
    vals = np.sort(rng.standard_normal(n_rows))
    labels = rng.integers(0, 2, n_rows).astype(np.int64)
    cases.append((
        f"best_split_scan ({n_rows} sorted rows)",
        kernels.best_split_scan_numba,
        kernels.best_split_scan_numpy,
        (vals, labels, 5),
    ))

    header = f"{'kernel':<52} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, numba_fn, numpy_fn, call_args in cases:
        t_np = time_call(numpy_fn, *call_args, repeats=args.repeats)
        if numba_fn is None:
            print(f"{name:<52} {'-':>10} {t_np:>10.3f} {'-':>8}")
            continue
        numba_fn(*call_args)  # compile outside the timed region
        t_nb = time_call(numba_fn, *call_args, repeats=args.repeats)
        print(f"{name:<52} {t_nb:>10.3f} {t_np:>10.3f} {t_np / t_nb:>7.1f}x")


if __name__ == "__main__":
    main()
