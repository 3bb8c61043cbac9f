#!/usr/bin/env python3
"""Benchmark the hot kernels: numba-compiled against the pure-Python/numpy
fallback (the same functions, uncompiled).

Run with the default backend (numba) so both variants are available in one
process; SPLITLEVY_BACKEND=numpy would make the two columns identical.
"""

import time

import numpy as np

from splitlevy import _kernels
from splitlevy.backend import BACKEND, USING_NUMBA


def make_path(n, seed=0):
    rng = np.random.default_rng(seed)
    t = np.concatenate(([0.0], np.cumsum(rng.uniform(0.001, 0.01, n))))
    jump = np.concatenate(([0.0], rng.exponential(0.3, n) * (rng.random(n) < 0.1)))
    v = np.empty(n + 1)
    v[0] = 1.0
    steps = rng.normal(0.0, 0.05, n)
    for k in range(1, n + 1):
        v[k] = v[k - 1] + steps[k - 1] + jump[k]
    return t, v, jump


def timeit(fn, *args, repeat=5):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    print(f"backend: {BACKEND}")
    if not USING_NUMBA:
        print("numba disabled; nothing to compare")
        return
    n = 200_000
    t, v, jump = make_path(n)
    eps = np.geomspace(0.5, 0.05, 6)
    levels = np.linspace(v.min() + 0.05, v.max() - 0.05, 5)
    cases = [
        ("tc_below", _kernels.tc_below, (t, v, jump, 1.0)),
        ("occupation_bins", _kernels.occupation_bins, (t, v, jump, 0.0, 0.05, 40)),
        ("last_passage", _kernels.last_passage, (t, v, jump, np.sort(levels))),
        ("running_min", _kernels.running_min, (t, v, jump)),
        ("upcrossings", _kernels.upcrossings, (t, v, jump, 1.0)),
        ("hcirc_occupation", _kernels.hcirc_occupation, (t, v, jump, n, eps)),
        ("generations_from_contour", _kernels.generations_from_contour, (t, v, jump, 1e-9)),
    ]
    print(f"{'kernel':26s} {'numba':>10s} {'numpy/py':>10s} {'speedup':>9s}")
    for name, fn, args in cases:
        fn(*args)  # warm the compile cache
        tn = timeit(fn, *args)
        tp = timeit(fn.py_func, *args, repeat=1 if name != "running_min" else 3)
        print(f"{name:26s} {tn*1e3:9.2f}ms {tp*1e3:9.2f}ms {tp/tn:8.1f}x")


if __name__ == "__main__":
    main()
