"""Benchmark the numba-compiled fork-join kernel against the pure path.

Runs the same simulation workload through ``fcfs_fork_join`` (compiled
unless TAILOPT_PURE_NUMPY=1) and through its uncompiled ``py_func``,
checks the outputs are bit-identical, and reports wall times.

Usage:
    python benchmarks/bench_kernels.py [--requests N] [--repeats R]
"""

import argparse
import time

import numpy as np

from tailopt import builtin_table1_scenario
from tailopt._backend import USE_NUMBA
from tailopt._kernels import fcfs_fork_join


def build_workload(n_requests: int, seed: int = 0):
    model = builtin_table1_scenario()
    rng = np.random.default_rng(seed)
    lam = model.lambdas
    lam_tot = lam.sum()
    arrivals = np.cumsum(rng.exponential(1.0 / lam_tot, size=n_requests))
    file_ids = rng.choice(model.r, size=n_requests, p=lam / lam_tot)
    ks = model.ks[file_ids]
    offsets = np.concatenate(([0], np.cumsum(ks)))
    u_sel = rng.random(n_requests)
    u_serv = rng.random(offsets[-1])
    pi = np.where(model.support, (model.ks / 7.0)[:, None], 0.0)
    cums = np.concatenate((np.zeros((model.r, 1)), np.cumsum(pi, axis=1)), axis=1)
    cums[:, -1] = model.ks
    return (file_ids, arrivals, ks, offsets, cums, u_sel, u_serv,
            model.alphas, model.betas)


def bench(fn, args, repeats: int) -> float:
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--requests", type=int, default=200_000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    workload = build_workload(args.requests)
    pure = getattr(fcfs_fork_join, "py_func", fcfs_fork_join)

    # warm-up triggers JIT compilation so it is excluded from timings
    out_a = fcfs_fork_join(*workload)
    out_b = pure(*workload)
    for a, b in zip(out_a, out_b):
        assert np.array_equal(a, b), "backends disagree"

    t_main = bench(fcfs_fork_join, workload, args.repeats)
    t_pure = bench(pure, workload, args.repeats)

    label = "numba njit" if USE_NUMBA else "pure (env flag set)"
    print(f"requests            : {args.requests}")
    print(f"selected backend    : {label}")
    print(f"fcfs_fork_join      : {t_main * 1e3:10.2f} ms")
    print(f"py_func (no jit)    : {t_pure * 1e3:10.2f} ms")
    if USE_NUMBA and t_main > 0:
        print(f"speedup             : {t_pure / t_main:10.1f}x")
    print("outputs bit-identical: yes")


if __name__ == "__main__":
    main()
