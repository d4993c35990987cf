"""Compare the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import time

import numpy as np

from bundleseg import _backend
from bundleseg.core import Streamline, pack


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def _streamlines(rng, m):
    out = []
    for _ in range(m):
        n = int(rng.integers(20, 41))
        out.append(Streamline(np.cumsum(rng.normal(size=(n, 3)), axis=0)))
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    py = _backend.load("python")
    try:
        cy = _backend.load("cython")
    except ImportError:
        print("compiled backend not built; only the numpy backend is available")
        cy = None

    a = pack(_streamlines(rng, 20))
    b = pack(_streamlines(rng, 2000))
    cases = [("mc_block 20x2000", lambda k: k.mc_block(a[0], a[1], b[0], b[1]))]
    for L, n in [(200, 200), (200, 1000), (1000, 1000)]:
        c = rng.random((L, n))
        cases.append((f"lapjv {L}x{n}", lambda k, c=c: k.lapjv(c, 1e-10)))

    print(f"{'case':<20}{'numpy [s]':>12}{'cython [s]':>12}{'speedup':>10}")
    for name, fn in cases:
        tp = _best(lambda: fn(py), args.repeat)
        if cy is None:
            print(f"{name:<20}{tp:>12.4f}{'-':>12}{'-':>10}")
            continue
        tc = _best(lambda: fn(cy), args.repeat)
        print(f"{name:<20}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
