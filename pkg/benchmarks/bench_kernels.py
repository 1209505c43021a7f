"""Compiled vs pure-numpy timings for the numba kernels.

    python benchmarks/bench_kernels.py [--repeat 200]

Each kernel is called once before timing so compilation is excluded.  The
python column is the same function's ``.py_func``, i.e. what runs under
ELCGEN_DISABLE_NUMBA=1.
"""

import argparse
import timeit

import numpy as np

from elcgen._accel import NUMBA_ENABLED
from elcgen.env.safety import rect_overlap_depth, ttc_kernel
from elcgen.env.world import WHEELBASE, bicycle_step
from elcgen.evalsuite.shapley import coalition_weights, shapley_kernel
from elcgen.mpc.qp import dual_active_set


def _qp_args(rng, n=10):
    A = rng.normal(size=(n, n))
    H = A @ A.T + 0.1 * np.eye(n)
    C = np.vstack([np.eye(n), -np.eye(n)])
    return (H, rng.normal(size=n) * 3.0, C, np.full(2 * n, 0.5), 1e-9, 2000)


def cases(rng):
    state = rng.uniform(0, 20, size=(8, 4))
    xs, ys = rng.uniform(0, 100, 8), rng.uniform(0, 10, 8)
    vxs, vys = rng.uniform(10, 30, 8), rng.normal(0, 1, 8)
    table = rng.normal(size=256)
    return {
        "bicycle_step": (bicycle_step, (state, rng.uniform(-3, 3, 8), rng.uniform(-0.3, 0.3, 8), 0.05, WHEELBASE)),
        "ttc_kernel": (ttc_kernel, (0.0, 1.75, 0.0, 25.0, 0.0, xs, ys, vxs, vys)),
        "rect_overlap_depth": (rect_overlap_depth, (0.0, 0.1, 0.2, 4.5, 1.8, 1.0, 0.5, -0.4, 4.0, 2.0)),
        "dual_active_set": (dual_active_set, _qp_args(rng)),
        "shapley_kernel(n=8)": (shapley_kernel, (table, 8, coalition_weights(8))),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)
    if not NUMBA_ENABLED:
        print("numba disabled: both columns run the python path")
    print(f"{'kernel':<22}{'numba us':>12}{'python us':>12}{'speedup':>10}")
    for name, (fn, a) in cases(np.random.default_rng(0)).items():
        fn(*a)
        fast = timeit.timeit(lambda: fn(*a), number=args.repeat) / args.repeat * 1e6
        slow = timeit.timeit(lambda: fn.py_func(*a), number=args.repeat) / args.repeat * 1e6
        print(f"{name:<22}{fast:>12.2f}{slow:>12.2f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
