"""Compare the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on identical inputs under both backends; the table gives the
best-of-N wall time and the largest relative difference between the results.
"""
import argparse
import math
import timeit

import numpy as np

from nbilliard import _pykernels as py
from nbilliard.potential import CentreSystem

try:
    from nbilliard import _ckernels as cy
except ImportError:
    cy = None


def cases():
    sys = CentreSystem([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.5]], [1.0, 0.7, 0.4], [1.0, 1.0, 1.5])
    C, M, A = sys.kargs
    rng = np.random.default_rng(0)
    pts = rng.uniform(-4, 4, (2000, 2))
    t = np.linspace(0, 1, 2001)
    nodes = np.column_stack([-3 + 6 * t, -2.5 + np.sin(np.pi * t)])
    # a bound orbit: no wall, no escape, stopped by the time limit
    y0 = np.array([0.0, 0.6, 1.1, 0.0])
    integ = (C, M, A, y0, (0.0, 1.0), math.inf, sys.barycentre, 1e6,
             50.0, 1e-10, 1e-12, 10**6, 1e-9, True)
    return [
        ("potential x2000", lambda k: [k.potential(C, M, A, x, y) for x, y in pts]),
        ("gradient x2000", lambda k: [k.gradient(C, M, A, x, y) for x, y in pts]),
        ("potential_many", lambda k: k.potential_many(C, M, A, pts)),
        ("hessian_many", lambda k: k.hessian_many(C, M, A, pts)),
        ("path_length", lambda k: k.path_length(C, M, A, 1.0, nodes)),
        ("integrate t=50", lambda k: k.integrate(*integ)[1]),
    ]


def rel_diff(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / max(1e-300, np.max(np.abs(b))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if cy is None:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"{'kernel':<18}{'python [s]':>12}{'cython [s]':>12}{'speedup':>10}{'max rel diff':>14}")
    for name, fn in cases():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat))
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat))
        d = rel_diff(fn(cy), fn(py))
        print(f"{name:<18}{tp:>12.4f}{tc:>12.5f}{tp / tc:>9.0f}x{d:>14.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
