"""Time the numba kernels against the numpy/LAPACK fallback.

Usage: python benchmarks/bench_kernels.py [--cells 500 2000 8000] [--repeat 20]
"""

import argparse
import time

import numpy as np

from radialpme import kernels
from radialpme.geometry import ModelManifold, build_grid
from radialpme.solver import InitialDatum, Operator, datum_values


def setup(cells):
    grid = build_grid(ModelManifold(), 10.0, cells)
    op = Operator.build(grid)
    u = datum_values(InitialDatum("bump", 1.0, 2.0), grid.centers)
    return np.ascontiguousarray(u), np.ascontiguousarray(grid.measures), op


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--cells", type=int, nargs="+", default=[500, 2000, 8000])
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    if not kernels.HAVE_NUMBA:
        print("numba not installed; nothing to compare")
        return
    print(f"{'cells':>7} {'kernel':>10} {'numba [ms]':>11} {'numpy [ms]':>11} {'speedup':>8} {'max diff':>9}")
    for cells in args.cells:
        u, w, op = setup(cells)
        a = (u, w, op.c, op.c_out, 2.0, 1e-2, 1e-12, 1e-12, 50)
        kernels.newton_step_numba(*a)  # compile
        t_nb = best_of(lambda: kernels.newton_step_numba(*a), args.repeat)
        t_np = best_of(lambda: kernels.newton_step_numpy(*a), args.repeat)
        diff = np.abs(kernels.newton_step_numba(*a)[0] - kernels.newton_step_numpy(*a)[0]).max()
        print(f"{cells:7d} {'newton':>10} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.1f} {diff:9.1e}")
        U = u**2
        kernels.apply_operator_numba(U, op.c, op.c_out)
        t_nb = best_of(lambda: kernels.apply_operator_numba(U, op.c, op.c_out), args.repeat)
        t_np = best_of(lambda: kernels.apply_operator_numpy(U, op.c, op.c_out), args.repeat)
        print(f"{cells:7d} {'operator':>10} {1e3 * t_nb:11.3f} {1e3 * t_np:11.3f} {t_np / t_nb:8.1f}")


if __name__ == "__main__":
    main()
