"""Benchmark the compiled kernels against the pure-numpy fallback.

Times full backward sweeps (implicit and explicit) per step count and
prints the per-solve latency plus speedup.  Run as:

    python3 benchmarks/bench_backends.py [--sizes 16,64,256] [--repeat 50]
"""

import argparse
import time

import numpy as np

import bdsde._kernels_py as kernels_py
from bdsde import builtin, make_grid, sample_path
from bdsde.tree_solver import terminal_layer

try:
    import bdsde._kernels as kernels_c
except ImportError:
    kernels_c = None


def _sweep_args(spec, grid, eps):
    term = terminal_layer(spec, grid)
    return (
        term.y,
        term.z,
        eps,
        grid.times,
        grid.delta,
        spec.f.kernel_descriptor(grid),
        spec.g.kernel_descriptor(grid),
    )


def _time(fn, repeat):
    fn()  # warm up
    start = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - start) / repeat


def run(sizes, repeat):
    spec = builtin("sine")  # nonlinear f exercises the fixed point
    rows = []
    for n in sizes:
        grid = make_grid(1.0, n)
        eps = sample_path(grid, seed=0).eps
        args = _sweep_args(spec, grid, eps)
        t_py_imp = _time(lambda: kernels_py.sweep_implicit(*args, 1e-12, 100), repeat)
        t_py_exp = _time(lambda: kernels_py.sweep_explicit(*args), repeat)
        if kernels_c is not None:
            t_c_imp = _time(lambda: kernels_c.sweep_implicit(*args, 1e-12, 100), repeat)
            t_c_exp = _time(lambda: kernels_c.sweep_explicit(*args), repeat)
            y_py, *_ = kernels_py.sweep_implicit(*args, 1e-12, 100)
            y_c, *_ = kernels_c.sweep_implicit(*args, 1e-12, 100)
            agree = float(np.max(np.abs(y_py - y_c)))
        else:
            t_c_imp = t_c_exp = float("nan")
            agree = float("nan")
        rows.append((n, t_py_imp, t_c_imp, t_py_exp, t_c_exp, agree))

    print(f"{'n':>6} {'implicit py':>12} {'implicit c':>12} {'speedup':>8} "
          f"{'explicit py':>12} {'explicit c':>12} {'speedup':>8} {'max|dy|':>10}")
    for n, pi, ci, pe, ce, agree in rows:
        su_i = pi / ci if ci == ci else float("nan")
        su_e = pe / ce if ce == ce else float("nan")
        print(f"{n:>6} {pi * 1e6:>10.1f}us {ci * 1e6:>10.1f}us {su_i:>7.1f}x "
              f"{pe * 1e6:>10.1f}us {ce * 1e6:>10.1f}us {su_e:>7.1f}x {agree:>10.2e}")
    if kernels_c is None:
        print("compiled extension not available; only the fallback was timed")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sizes", default="16,64,256")
    parser.add_argument("--repeat", type=int, default=50)
    ns = parser.parse_args()
    run([int(v) for v in ns.sizes.split(",")], ns.repeat)
