"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--sizes 256,1024,4096] [--repeat 3]

Prints one line per (kernel, n) with both timings, the speedup and the
relative difference between the two results.
"""

import argparse
import time

import numpy as np

from gqvar import _pycore
from gqvar.models import CovarianceModel, increment_covariance, rho_row

try:
    from gqvar import _core
except ImportError:  # extension not built
    _core = None


def best_of(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n):
    rr = rho_row(0.7, n)
    theta = increment_covariance(CovarianceModel.subfbm(0.6), min(n, 2048)).theta
    v = np.array([0.4, 0.4, 0.4])
    yield "lag_triple_sum", n, lambda m: m.lag_triple_sum(rr, n)
    yield "toeplitz_square_sums", n, lambda m: m.toeplitz_square_sums(rr, n)[1]
    yield "hadamard_sum", theta.shape[0], lambda m: m.hadamard_sum(theta, theta)
    yield "nested_sigma_sq", theta.shape[0], lambda m: m.nested_sigma_sq(theta)[-1]
    yield "simplex_sum(l=3)", n, lambda m: m.simplex_sum(v, n)
    if n <= 256:
        small = theta[:64, :64].copy()
        yield "brute_triple_sum", 64, lambda m: m.brute_triple_sum(small)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--sizes", default="256,1024,4096")
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    if _core is None:
        raise SystemExit("compiled extension not available; run pip install -e . first")
    sizes = [int(x) for x in args.sizes.split(",")]
    print(f"{'kernel':<22}{'n':>7}{'cython s':>12}{'python s':>12}{'speedup':>10}{'rel diff':>11}")
    for n in sizes:
        for name, size, call in cases(n):
            tc, rc = best_of(lambda: call(_core), args.repeat)
            tp, rp = best_of(lambda: call(_pycore), args.repeat)
            rel = abs(rc - rp) / max(abs(rp), 1e-300)
            print(f"{name:<22}{size:>7}{tc:>12.4g}{tp:>12.4g}{tp / tc:>10.1f}{rel:>11.2e}")


if __name__ == "__main__":
    main()
