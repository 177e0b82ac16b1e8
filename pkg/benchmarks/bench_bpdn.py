#!/usr/bin/env python3
"""Timing comparison between the compiled solver core and the NumPy fallback.

Both cores run the identical primal-dual iteration on the same instances
with convergence checks disabled (tolerance 0), so every run executes the
full iteration budget and the numbers measure pure per-iteration cost.
A final section times the public solve_block_bpdn entry point at survey
scale with its default stopping rule, which is what sweep runtimes are
made of.

Usage: python3 benchmarks/bench_bpdn.py [--iterations 2000] [--repeats 3]
"""

import argparse
import time

import numpy as np

from blockcs import BpdnOptions, SOLVER_BACKEND, sample_sensing_matrix, solve_block_bpdn
from blockcs import _pdhg_py

try:
    from blockcs import _pdhg
except ImportError:
    _pdhg = None

SIZES = [
    ("small", 20, 40, 4),
    ("desk", 50, 100, 10),
    ("survey", 150, 300, 10),
]


def make_instance(N, M, Q, seed):
    rng = np.random.default_rng(seed)
    A = sample_sensing_matrix(N, M, seed)
    x = np.zeros(M)
    x[:Q] = rng.standard_normal(Q)
    y = A.entries @ x + 0.05 * rng.standard_normal(N)
    s = np.linalg.svd(A.entries, compute_uv=False)
    step = 0.99 / float(s[0])
    return A.entries, y, step


def time_core(core, A, y, Q, step, iterations, repeats):
    best = np.inf
    x = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        x, it, _, _, _, _ = core.pdhg_core(
            A, y, Q, 0.05, step, step, iterations, 0.0, 0.0, 50
        )
        best = min(best, time.perf_counter() - t0)
        assert it == iterations
    return best, x


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--repeats", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"active backend: {SOLVER_BACKEND}")
    if _pdhg is None:
        print("compiled core not built; timing the NumPy core only\n")

    header = f"{'size':8} {'N':>4} {'M':>4} {'numpy ms':>10} {'compiled ms':>12} {'speedup':>8} {'max |dx|':>10}"
    print(header)
    print("-" * len(header))
    for name, N, M, Q in SIZES:
        A, y, step = make_instance(N, M, Q, args.seed)
        t_py, x_py = time_core(_pdhg_py, A, y, Q, step, args.iterations, args.repeats)
        if _pdhg is not None:
            t_c, x_c = time_core(_pdhg, A, y, Q, step, args.iterations, args.repeats)
            dx = float(np.max(np.abs(x_c - x_py)))
            print(f"{name:8} {N:>4} {M:>4} {t_py * 1e3:>10.1f} {t_c * 1e3:>12.1f} "
                  f"{t_py / t_c:>7.2f}x {dx:>10.2e}")
        else:
            print(f"{name:8} {N:>4} {M:>4} {t_py * 1e3:>10.1f} {'-':>12} {'-':>8} {'-':>10}")

    # end-to-end cost of one survey-scale trial solve, default stopping rule
    name, N, M, Q = SIZES[-1]
    A, y, _ = make_instance(N, M, Q, args.seed)
    times = []
    for _ in range(args.repeats):
        t0 = time.perf_counter()
        rec = solve_block_bpdn(A, y, Q, BpdnOptions(epsilon=0.6))
        times.append(time.perf_counter() - t0)
    print(f"\nsolve_block_bpdn at survey scale ({N}x{M}): "
          f"{min(times) * 1e3:.1f} ms, {rec.iterations} iterations, "
          f"converged={rec.converged}")


if __name__ == "__main__":
    main()
