"""Time the numba kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time

import numpy as np

from mdforms import _kernels
from mdforms.fixtures import grid, load_fixture
from mdforms.operators import integer_derivative


def _time(fn, repeat):
    fn()  # warm up, includes jit compile
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    g = load_fixture("annulus")
    D0 = integer_derivative(g, 0)
    D1 = integer_derivative(g, 1)
    rng = np.random.default_rng(0)
    dense = rng.integers(-3, 4, size=(160, 160)).astype(np.int64)
    coords, tris, _ = grid(60, 60)
    yield "peel_singletons D0 annulus", lambda nb: _kernels.peel_singletons(D0, use_numba=nb)
    yield "peel_singletons D1 annulus", lambda nb: _kernels.peel_singletons(D1, use_numba=nb)
    yield "rank_mod_p 160x160", lambda nb: _kernels.rank_mod_p(dense, use_numba=nb)
    yield f"dual volumes p=0, {len(tris)} triangles", lambda nb: _kernels.dual_volumes_per_simplex(coords, tris, 0, use_numba=nb)
    yield f"dual volumes p=1, {len(tris)} triangles", lambda nb: _kernels.dual_volumes_per_simplex(coords, tris, 1, use_numba=nb)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.numba is None:
        print("numba not installed; only the numpy path can run")
    print(f"{'kernel':<40} {'numpy [ms]':>11} {'numba [ms]':>11} {'speedup':>8}")
    for name, fn in cases():
        t_np = _time(lambda: fn(False), args.repeat)
        if _kernels.numba is None:
            print(f"{name:<40} {t_np * 1e3:11.3f} {'-':>11} {'-':>8}")
            continue
        t_nb = _time(lambda: fn(True), args.repeat)
        print(f"{name:<40} {t_np * 1e3:11.3f} {t_nb * 1e3:11.3f} {t_np / t_nb:8.1f}x")


if __name__ == "__main__":
    main()
