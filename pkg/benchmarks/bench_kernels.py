"""Compare the compiled and numpy kernel backends on flip-point revaluation.

    python3 benchmarks/bench_kernels.py [--contracts N] [--repeat R]

Prints per-call wall time for each backend, the speedup, and the largest
relative disagreement between the two.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from gexprobe.greeks import SENTINEL_TTE
from gexprobe.kernels import available_backends, get_backend


def make_chain(n: int, spot: float = 500.0, seed: int = 0):
    rng = np.random.default_rng(seed)
    strikes = np.round(spot * rng.uniform(0.9, 1.1, n))
    tte = np.maximum(rng.integers(0, 60, n) / 365.0, SENTINEL_TTE)
    iv = rng.uniform(0.08, 0.40, n)
    weights = rng.integers(0, 20_000, n) * np.where(rng.random(n) < 0.5, 1.0, -1.0)
    return strikes, tte, iv, weights


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--contracts", type=int, default=4000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    spot = 500.0
    strikes, tte, iv, w = make_chain(args.contracts, spot)
    cases = {"flip grid (81)": np.linspace(0.9 * spot, 1.1 * spot, 81),
             "dense scan (10001)": np.linspace(0.9 * spot, 1.1 * spot, 10_001)}
    backends = available_backends()
    print(f"contracts={args.contracts} backends={','.join(backends)}")
    for label, grid in cases.items():
        times, curves = {}, {}
        for name in backends:
            k = get_backend(name)
            curves[name] = k.gex_curve(grid, strikes, tte, iv, w, 0.0)
            number = 1 if grid.size > 1000 else 10
            t = min(timeit.repeat(lambda: k.gex_curve(grid, strikes, tte, iv, w, 0.0),
                                  number=number, repeat=args.repeat)) / number
            times[name] = t
            print(f"  {label:<20} {name:<7} {1e3 * t:10.3f} ms/call")
        if len(backends) == 2:
            a, b = curves["python"], curves["cython"]
            rel = float(np.max(np.abs(a - b)) / max(np.max(np.abs(a)), 1e-300))
            print(f"  {label:<20} speedup {times['python'] / times['cython']:.2f}x  max rel diff {rel:.2e}")


if __name__ == "__main__":
    main()
