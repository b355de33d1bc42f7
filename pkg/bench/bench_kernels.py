"""Times the compiled and numpy kernels on identical random inputs.

Usage: python3 bench/bench_kernels.py [--K 1000] [--L 20] [--repeat 20]
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from ntnopt import _pykernels

try:
    from ntnopt import _kernels
except ImportError:  # extension not built
    _kernels = None


def _inputs(K: int, L: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    Xt = rng.normal(0.3, 0.5, (K, L))
    B = rng.uniform(0.0, 2.0, (K, L))
    r = rng.uniform(0.5, 1.5, K)
    cand = rng.random((K, L)) < 0.4
    cand[np.arange(K), rng.integers(0, L, K)] = True
    spectral = rng.uniform(0.1, 8.0, (K, L))
    bandwidth = np.full(L, 20e6)
    order = rng.permutation(K).astype(np.int64)
    return Xt, B, r, order, cand, spectral, bandwidth


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=int, default=1000)
    ap.add_argument("--L", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    Xt, B, r, order, cand, spectral, bandwidth = _inputs(args.K, args.L)
    backends = [("python", _pykernels)] + ([("cython", _kernels)] if _kernels is not None else [])
    print(f"K={args.K} L={args.L} repeat={args.repeat}")
    for name, mod in backends:
        t_proj = min(timeit.repeat(lambda: mod.project_rows(Xt, B, r, 500, 1e-13), number=1, repeat=args.repeat))
        t_greedy = min(timeit.repeat(lambda: mod.greedy_assign(order, cand, spectral, bandwidth, np.zeros(args.L)),
                                     number=1, repeat=args.repeat))
        print(f"{name:7s} project_rows {1e3 * t_proj:9.3f} ms   greedy_assign {1e3 * t_greedy:9.3f} ms")
    if _kernels is None:
        print("compiled kernels unavailable; build with `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
