"""Timing comparison of the numba kernels against their numpy twins.

Run:  python benchmarks/bench_backends.py
Numba must be importable; the first call per kernel pays JIT compilation
and is excluded from the timings.
"""

import time

import numpy as np

from pmefront._backend import NUMBA_ENABLED
from pmefront import _kernels


def timeit(fn, *args, repeat=7):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def stencil_case(n, width=7, seed=0):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=n)
    cols = np.clip(np.arange(n)[:, None] + np.arange(width)[None, :]
                   - width // 2, 0, n - 1).astype(np.int64)
    wts = rng.normal(size=(n, width))
    return vals, cols, wts


def height_case(n_nodes):
    from pmefront.domain import Domain
    from pmefront.fields import IntervalGrid
    from pmefront.oracle import quadratic_pressure_1d

    sol = quadratic_pressure_1d(2.0, 1.0)
    R0 = float(sol.R(1.0))
    grid = IntervalGrid(Domain.interval(-R0, R0), n_nodes)
    prob = sol.problem(grid)
    xg = np.linspace(-R0 - 1.0, R0 + 1.0, 4 * n_nodes)
    vg = sol.v(xg, 1.05)
    return (np.ascontiguousarray(grid.points),
            np.ascontiguousarray(prob.v0_data.grad[:, 0]),
            np.ascontiguousarray(prob.v0_data.values),
            vg, float(xg[0]), float(xg[1] - xg[0]), -0.5, 0.5, 81, 1e-12, 60)


def main():
    if not NUMBA_ENABLED:
        raise SystemExit("numba backend disabled; run without "
                         "PMEFRONT_NUMBA=0 to benchmark both paths")
    rows = []

    for n in (10_000, 200_000):
        args = stencil_case(n)
        _kernels._apply_stencil_numba(*args)      # JIT warmup
        t_np = timeit(_kernels._apply_stencil_numpy, *args)
        t_nb = timeit(_kernels._apply_stencil_numba, *args)
        rows.append((f"apply_stencil n={n}", t_np, t_nb))

    for n in (201, 5001):
        args = height_case(n)
        _kernels._height_roots_1d_numba(*args)    # JIT warmup
        t_np = timeit(_kernels._height_roots_1d_numpy, *args, repeat=5)
        t_nb = timeit(_kernels._height_roots_1d_numba, *args, repeat=5)
        rows.append((f"height_roots n={n}", t_np, t_nb))

    print(f"{'kernel':28s} {'numpy [ms]':>12s} {'numba [ms]':>12s} "
          f"{'speedup':>9s}")
    for name, t_np, t_nb in rows:
        print(f"{name:28s} {t_np * 1e3:12.3f} {t_nb * 1e3:12.3f} "
              f"{t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
