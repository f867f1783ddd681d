"""Benchmark the compiled solver kernel against the numpy fallback.

Times full solves of synthetic programs shaped like the planner's output
(dense Hessian, box rows, equality rows, a batch of 3-ball constraints)
at several sizes, once per backend.

Usage: python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from seapack import _backend
from seapack.qp import ConvexProgram, solve


def make_program(rng, n, m_eq, n_balls):
    M = rng.normal(size=(n, max(10, n // 20)))
    H = M @ M.T * 0.01 + np.eye(n) * 0.5
    g = rng.normal(size=n)
    A_in = np.vstack([np.eye(n), -np.eye(n)])
    b_in = np.concatenate([np.full(n, 2.0), np.full(n, 2.0)])
    A_eq = rng.normal(size=(m_eq, n)) * 0.1
    b_eq = A_eq @ rng.normal(size=n) * 0.1
    balls = [(np.arange(i, i + 3), np.zeros(3), 5.0)
             for i in range(0, 3 * n_balls, 3)]
    return ConvexProgram(H=H, g=g, A_eq=A_eq, b_eq=b_eq,
                         A_in=A_in, b_in=b_in, balls=balls)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    if not _backend.has_compiled():
        print("compiled kernel unavailable; timing the fallback only")
    sizes = [(60, 8, 4), (200, 30, 20), (650, 100, 100), (1200, 150, 100)]
    backends = ["pure"] + (["compiled"] if _backend.has_compiled() else [])

    print(f"{'size':>6} {'rows':>6}", *(f"{b:>12}" for b in backends),
          f"{'speedup':>9}" if len(backends) == 2 else "")
    rng = np.random.default_rng(0)
    for n, m_eq, n_balls in sizes:
        p = make_program(rng, n, m_eq, n_balls)
        m = p.A_eq.shape[0] + p.A_in.shape[0] + 3 * n_balls
        times = {}
        for bk in backends:
            best = np.inf
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                rep = solve(p, tol=1e-6, backend=bk)
                best = min(best, time.perf_counter() - t0)
            times[bk] = best
            assert rep.status == "optimal", rep.status
        cells = [f"{times[b] * 1e3:9.1f} ms" for b in backends]
        tail = (f"{times['pure'] / times['compiled']:8.2f}x"
                if len(backends) == 2 else "")
        print(f"{n:>6} {m:>6}", *cells, tail)


if __name__ == "__main__":
    main()
