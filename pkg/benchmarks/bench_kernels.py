#!/usr/bin/env python3
"""Compare the compiled SMO kernel against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py [n_samples ...]

Both paths use identical working-set selection, so the duals must agree
bit-for-bit; this script checks that while timing them.
"""

import sys
import time

import numpy as np

from gaitforge import svm


def make_problem(n, d=39, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, d))
    w = rng.standard_normal(d)
    y = np.where(X @ w + 0.3 * rng.standard_normal(n) > 0, 1.0, -1.0)
    return np.ascontiguousarray(X), np.ascontiguousarray(y)


def run(solver, K, y, C, tol=1e-3, max_iter=2_000_000, repeats=3):
    best = float("inf")
    out = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = solver(K, y, C, tol, max_iter)
        best = min(best, time.perf_counter() - t0)
    return out, best


def main(sizes):
    if not svm.HAVE_COMPILED_SMO:
        print("compiled kernel not built; showing fallback only")
    print(f"{'n':>6} {'compiled':>12} {'fallback':>12} {'speedup':>9}  duals")
    for n in sizes:
        X, y = make_problem(n)
        K = np.ascontiguousarray(svm.kernel_matrix("linear", None, X))
        C = np.full(n, 1.0)
        res_py, t_py = run(svm._solve_gram_python, K, y, C)
        line = f"{n:>6} "
        if svm.HAVE_COMPILED_SMO:
            from gaitforge._smo import solve_gram

            res_c, t_c = run(solve_gram, K, y, C)
            match = np.array_equal(np.asarray(res_c[0]), res_py[0])
            line += f"{t_c * 1e3:>10.1f}ms {t_py * 1e3:>10.1f}ms {t_py / t_c:>8.1f}x"
            line += f"  {'identical' if match else 'DIFFER'}"
        else:
            line += f"{'-':>12} {t_py * 1e3:>10.1f}ms"
        print(line)


if __name__ == "__main__":
    sizes = [int(a) for a in sys.argv[1:]] or [200, 500, 1000, 2000]
    main(sizes)
