"""Compare the compiled kernels with the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Workloads mirror the package hot paths: one EOF-MFP fitness evaluation
(120 ping/receiver angle solves on the 50-layer grid) and the Jacobi
eigensolve of a 50 x 50 profile covariance.
"""

import argparse
import time

import numpy as np

from sspmtl import kernels
from sspmtl.profile import layer_depths
from sspmtl.world import munk_profile


def best_of(fn, repeat):
    fn()
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return min(samples)


def workloads():
    z = layer_depths(3500, 50)
    s = munk_profile(z)
    i1 = np.full(120, z.size - 1, dtype=np.int64)
    targets = np.random.default_rng(0).uniform(1000.0, 4000.0, 120)
    rng = np.random.default_rng(1)
    x = rng.normal(size=(50, 300))
    cov = x @ x.T / 300
    return {
        "solve_many (120 rays)": lambda b: b.solve_many(z, s, 0, i1, targets, 1e-3, 200),
        "jacobi_eigh (50 x 50)": lambda b: b.jacobi_eigh(cov, 1e-12, 100),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=20)
    args = parser.parse_args()
    backends = {"python": kernels.python_backend}
    if kernels.compiled_backend is not None:
        backends["cython"] = kernels.compiled_backend
    else:
        print("compiled kernels not built; timing the NumPy fallback only")
    print(f"{'workload':<24}" + "".join(f"{n:>14}" for n in backends) + f"{'speedup':>10}")
    for name, fn in workloads().items():
        t = {b: best_of(lambda b=b: fn(backends[b]), args.repeat) for b in backends}
        speedup = f"{t['python'] / t['cython']:>9.1f}x" if "cython" in t else ""
        print(f"{name:<24}" + "".join(f"{t[b] * 1e3:>11.3f} ms" for b in backends) + speedup)


if __name__ == "__main__":
    main()
