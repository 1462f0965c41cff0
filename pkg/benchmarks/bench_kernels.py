"""Compare the numba and numpy kernel backends on the modular hot paths.

Usage: python benchmarks/bench_kernels.py [--n 3] [--repeat 5]

Three workloads: batched evaluation of every entry of R at a prime point,
one three-leg product R12 R13 R23 mod p, and a matrix-vector sweep.  The
first numba call of each kernel compiles it and is reported separately.
"""
import argparse
import os
import statistics
import time

import numpy as np

from qloop import kernels
from qloop.builders import model
from qloop.scalars import PrimePoint
from qloop.tensor import eval_many
from qloop.verifier import prime_table


def timed(fn, repeat):
    first = time.perf_counter()
    fn()
    first = time.perf_counter() - first
    runs = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        runs.append(time.perf_counter() - t0)
    return first, statistics.median(runs)


def workloads(n, seed):
    p = prime_table()[0]
    rng = np.random.default_rng(seed)
    pt = PrimePoint(p, [int(x) for x in rng.integers(2, p, size=8, dtype=np.int64)])
    R = model(n).R()
    scalars = [v for _, v in R.items()]
    Rm = R.eval_mod(pt)
    r12, r13, r23 = Rm.embed([1, 2], 3), Rm.embed([1, 3], 3), Rm.embed([2, 3], 3)
    x = [int(v) for v in rng.integers(0, p, size=r12.dim, dtype=np.int64)]
    return {
        "evaluate R entries": lambda: eval_many(scalars, pt),
        "R12 R13 R23 mod p": lambda: r12 @ r13 @ r23,
        "R12 R13 R23 |x>": lambda: r12.mat_vec(r13.mat_vec(r23.mat_vec(x))),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    results = {}
    for backend in ("numba", "numpy"):
        os.environ["QLOOP_KERNELS"] = backend
        if kernels.backend_name() != backend:
            print(f"{backend}: not available, skipped")
            continue
        for name, fn in workloads(args.n, args.seed).items():
            results[(backend, name)] = timed(fn, args.repeat)
    os.environ.pop("QLOOP_KERNELS", None)

    print(f"n={args.n}, N={2 * args.n}, median of {args.repeat} runs")
    print(f"{'workload':24s} {'numba':>10s} {'numpy':>10s} {'speedup':>8s} {'numba 1st':>10s}")
    for name in workloads(args.n, args.seed):
        nb, npy = results.get(("numba", name)), results.get(("numpy", name))
        if nb and npy:
            print(f"{name:24s} {nb[1]:10.4f} {npy[1]:10.4f} {npy[1] / nb[1]:7.1f}x {nb[0]:10.3f}")
        elif npy:
            print(f"{name:24s} {'-':>10s} {npy[1]:10.4f}")


if __name__ == "__main__":
    main()
