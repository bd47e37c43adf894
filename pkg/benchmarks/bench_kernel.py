"""Time the compiled and pure-Python integration kernels on the same workload.

Usage: python benchmarks/bench_kernel.py [--repeat N]

Each run integrates the Figure 2 system from (1.3, 0) for 20 time units at the
default tolerances, with the downward section event active, and checks that
both kernels take the same steps.
"""
import argparse
import time

import numpy as np

from planarcycles import _kernel_py
from planarcycles._tape import compile_system
from planarcycles.examples import FIGURE2, build_section3

try:
    from planarcycles import _kernel as _kernel_c
except ImportError:
    _kernel_c = None


def workload():
    s = build_section3(FIGURE2)
    tape = compile_system(s)
    a, b = s.domain
    return (tape.nodes, tape.params, tape.children, tape.phi, tape.g, tape.F,
            0.0, 1.3, 0.0, 0.0, 1e-10, 1e-12, 0.0, np.inf, 20.0, 100000, a, b, 0)


def best_of(kernel, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = kernel.run_dopri(*args)
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    wl = workload()
    t_py, (_, rec_py, n_py) = best_of(_kernel_py, wl, args.repeat)
    print(f"python  {t_py * 1e3:9.2f} ms  {len(rec_py)} steps  {n_py} rhs evaluations")
    if _kernel_c is None:
        print("cython  not built")
        return
    t_c, (_, rec_c, n_c) = best_of(_kernel_c, wl, args.repeat)
    print(f"cython  {t_c * 1e3:9.2f} ms  {len(rec_c)} steps  {n_c} rhs evaluations")
    print(f"speedup {t_py / t_c:9.1f}x")
    diff = np.nanmax(np.abs(rec_c - rec_py))
    print(f"same step sequence: {n_c == n_py and rec_c.shape == rec_py.shape}, max state difference {diff:.1e}")


if __name__ == "__main__":
    main()
