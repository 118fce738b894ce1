"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--n 10000] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from partition_lab import kernels
from partition_lab.density import MixtureDensity, sample
from partition_lab.fitters import FitConfig, fit


def bench(fn, repeat):
    t = timeit.repeat(fn, number=1, repeat=repeat)
    return min(t)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=10000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()

    try:
        kernels.get_backend("cython")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return

    q = MixtureDensity.from_triples([(0.5, -2.0, 1.5), (0.5, 2.0, 1.5)])
    x = sample(q, args.n, 0).points
    mu = np.array([-2.0, 2.0])
    sigma = np.array([1.5, 1.5])
    la = np.log([0.5, 0.5])

    cases = {
        "wta_pass": lambda b: kernels.wta_pass(x, mu, sigma, la, backend=b),
        "soft_pass": lambda b: kernels.soft_pass(x, mu, sigma, la, backend=b),
        "posterior_pass": lambda b: kernels.posterior_pass(x, mu, sigma, la, backend=b),
        "fit kmeans": lambda b: fit("kmeans", x, FitConfig(init=[(-2, 1.5), (2, 1.5)]), backend=b),
        "fit em": lambda b: fit("em", x, FitConfig(init=[(-2, 1.5), (2, 1.5)]), backend=b),
        "fit posterior_descent": lambda b: fit(
            "posterior_descent", x, FitConfig(init=[(-2, 1.5), (2, 1.5)], grad_tol=0.03), backend=b
        ),
    }
    print(f"n = {args.n}, best of {args.repeat}")
    print(f"{'case':24s} {'cython ms':>10s} {'python ms':>10s} {'speedup':>8s}")
    for name, fn in cases.items():
        rep = args.repeat if name.startswith(("wta", "soft", "post")) else max(3, args.repeat // 5)
        tc = bench(lambda: fn("cython"), rep)
        tp = bench(lambda: fn("python"), rep)
        print(f"{name:24s} {tc * 1e3:10.3f} {tp * 1e3:10.3f} {tp / tc:8.2f}x")


if __name__ == "__main__":
    main()
