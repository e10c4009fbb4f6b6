"""Benchmark the compiled Sturm-sequence bisection kernel against the
pure-Python fallback on Hermitian tridiagonal minimum-eigenvalue problems.

Usage: python3 benchmarks/bench_sturm.py [sizes...]
"""

import sys
import time

import numpy as np

from pintbounds import tridiag
from pintbounds import _sturm_py

try:
    from pintbounds import _sturm
    BACKENDS = {"compiled": _sturm.min_eig, "pure-python": _sturm_py.min_eig}
except ImportError:
    BACKENDS = {"pure-python": _sturm_py.min_eig}


def bench(n, repeats=20):
    rng = np.random.default_rng(0)
    mu = 0.8
    d = np.full(n, 1.0 + mu * mu) + 0.01 * rng.standard_normal(n)
    d[-1] = 1.0
    b = np.full(n - 1, mu)
    b2 = np.ascontiguousarray(b * b)
    d = np.ascontiguousarray(d)
    lo, hi = 0.0, float(np.max(d) + 2 * mu)
    rows = {}
    for name, fn in BACKENDS.items():
        t0 = time.perf_counter()
        for _ in range(repeats):
            val = fn(d, b2, lo, hi, tridiag.BISECT_ITERS)
        rows[name] = (time.perf_counter() - t0) / repeats, val
    ref = np.min(np.linalg.eigvalsh(
        np.diag(d) + np.diag(b, 1) + np.diag(b, -1)))
    return rows, ref


def main():
    sizes = [int(s) for s in sys.argv[1:]] or [100, 1000, 10000]
    print(f"backend selected by the package: "
          f"{'compiled' if tridiag.COMPILED else 'pure-python'}")
    for n in sizes:
        rows, ref = bench(n)
        print(f"n={n}:")
        for name, (dt, val) in rows.items():
            print(f"  {name:<12s} {dt*1e3:9.3f} ms   "
                  f"min-eig error {abs(val-ref):.2e}")
        if len(rows) == 2:
            speedup = rows["pure-python"][0] / rows["compiled"][0]
            print(f"  speedup {speedup:.1f}x")


if __name__ == "__main__":
    main()
