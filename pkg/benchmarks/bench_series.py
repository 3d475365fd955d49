"""Benchmark the compiled series kernels against the NumPy fallback.

The rotational heat-kernel sums dominate the runtime of sampling,
score evaluation, and the Langevin loops, so this compares the two
backends on representative workloads:

    python benchmarks/bench_series.py
"""

import math
import time

import numpy as np

from se3diffuse._kernels import BACKEND, series_np

try:
    from se3diffuse._kernels import _series_cy
except ImportError:
    _series_cy = None


def time_call(fn, *args, repeats=5):
    best = math.inf
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def main():
    rng = np.random.default_rng(0)
    print(f"active backend: {BACKEND}")
    if _series_cy is None:
        print("compiled backend not built; benchmarking the NumPy fallback only")
    backends = [("numpy", series_np)] + ([("cython", _series_cy)] if _series_cy else [])

    workloads = [
        ("density, 1e5 angles, eps=0.25, lmax=32", "series_f",
         (rng.uniform(1e-3, math.pi, 100_000), 0.25, 32)),
        ("density, 1e5 angles, eps=0.005, lmax=150", "series_f",
         (rng.uniform(1e-3, math.pi, 100_000), 0.005, 150)),
        ("density, 4096 angles, eps=5e-7, lmax=12000", "series_f",
         (rng.uniform(1e-4, 0.05, 4096), 5e-7, 12_000)),
        ("score series, 1e5 angles, eps=0.25, lmax=32", "series_df",
         (rng.uniform(1e-2, 3.0, 100_000), 0.25, 32)),
        ("score series, 1e4 angles, eps=0.005, lmax=150", "series_df",
         (rng.uniform(1e-2, 3.0, 10_000), 0.005, 150)),
    ]

    header = f"{'workload':52s}" + "".join(f"{name:>12s}" for name, _ in backends)
    print(header)
    print("-" * len(header))
    for label, fname, args in workloads:
        row = f"{label:52s}"
        base = None
        for name, mod in backends:
            t = time_call(getattr(mod, fname), *args)
            row += f"{t * 1e3:10.2f}ms"
            if base is None:
                base = t
        if _series_cy is not None and base is not None:
            row += f"   (numpy/cython = {base / t:.1f}x)"
        print(row)

    if _series_cy is not None:
        theta = rng.uniform(1e-3, math.pi, 4096)
        for eps in (0.005, 0.25, 2.0):
            a = series_np.series_f(theta, eps, 400)
            b = _series_cy.series_f(theta, eps, 400)
            assert np.allclose(a, b, rtol=1e-12, atol=1e-12)
        print("backend agreement verified (rtol 1e-12)")


if __name__ == "__main__":
    main()
