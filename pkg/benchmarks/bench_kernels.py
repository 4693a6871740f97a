"""Compare the numba kernels with their pure-numpy twins.

Run ``python3 benchmarks/bench_kernels.py``. Kernel timings exclude the
first (compiling) call. The end-to-end rows run a stochastic example-3
track in a subprocess under each setting of ``STOCHTRACK_NUMBA``.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from stochtrack import linalg
from stochtrack.problems import STENCILS


def best_of(fn, repeat=5, number=None):
    if number is None:
        t = timeit.timeit(fn, number=1)
        number = max(1, int(0.05 / max(t, 1e-9)))
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def bench_lu(sizes):
    rng = np.random.default_rng(0)
    rows = []
    for n in sizes:
        a = rng.standard_normal((n, n)) + n * np.eye(n)
        b = rng.standard_normal(n)
        out = [f"lu_solve n={n}"]
        for backend in ("numba", "numpy"):
            linalg.lu_solve(a, b, backend=backend)
            out.append(best_of(lambda: linalg.lu_solve(a, b, backend=backend)))
        out.append(best_of(lambda: np.linalg.solve(a, b)))
        rows.append(out)
    return rows


def bench_stencils(n):
    rng = np.random.default_rng(1)
    x = 1 + 0.1 * rng.standard_normal(2 * (n + 1))
    u = 0.2 * rng.standard_normal(n - 1)
    ih2 = float(n) ** 2
    cases = {
        "ex2_residual": (u, 10.0, ih2),
        "ex2_jacobian": (u, 10.0, ih2),
        "ex3_residual": (x, 40.0, ih2, 1 / 3, 2 / 3, 50.0),
        "ex3_jacobian": (x, 40.0, ih2, 50.0),
    }
    rows = []
    for name, args in cases.items():
        out = [f"{name} n={n}"]
        for backend in ("numba", "numpy"):
            fn = STENCILS[backend][name]
            fn(*args)
            out.append(best_of(lambda: fn(*args)))
        out.append(float("nan"))
        rows.append(out)
    return rows


def bench_end_to_end():
    code = (
        "import time;from stochtrack import *;from stochtrack.problems import get_problem;"
        "pr=get_problem('example3',100);cfg=TrackerConfig(delta_p=-1.0,seed=0);"
        "track_stochastic(pr.system,pr.branches[0].u0,cfg);"
        "t=time.perf_counter();track_stochastic(pr.system,pr.branches[0].u0,cfg);"
        "print(time.perf_counter()-t)"
    )
    out = ["track_stochastic example3 n=100"]
    for flag in ("1", "0"):
        env = dict(os.environ, STOCHTRACK_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        out.append(float(res.stdout.strip()))
    out.append(float("nan"))
    return [out]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="20,50,100,202,400")
    ap.add_argument("--skip-end-to-end", action="store_true")
    args = ap.parse_args(argv)
    sizes = [int(s) for s in args.sizes.split(",")]
    rows = bench_lu(sizes) + bench_stencils(100)
    if not args.skip_end_to_end:
        rows += bench_end_to_end()
    print(f"{'case':34s} {'numba [s]':>11s} {'numpy [s]':>11s} {'speedup':>8s} {'LAPACK [s]':>11s}")
    for name, nb, npy, lap in rows:
        lap_s = "" if np.isnan(lap) else f"{lap:11.3e}"
        print(f"{name:34s} {nb:11.3e} {npy:11.3e} {npy / nb:8.1f} {lap_s}")


if __name__ == "__main__":
    main()
