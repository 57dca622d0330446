"""Time the compiled and NumPy mirror-step kernels on identical inputs.

    python3 benchmarks/bench_kernels.py [--dims 10 100 1000] [--repeat 2000]
"""

import argparse
import timeit

import numpy as np

from omdlab import _kernels_py

try:
    from omdlab import _ckernels
except ImportError:
    _ckernels = None


def cases(d, rng):
    eps = 1e-6
    x = rng.dirichlet(np.ones(d)) * (1 - d * eps) + eps
    g = rng.standard_normal(d)
    lo, hi = np.full(d, 1e-3), np.full(d, 10.0)
    xb = rng.uniform(1e-3, 10.0, d)
    return {
        "project_capped_simplex": (x - 0.1 * g, eps),
        "entropy_simplex_step": (x, g, 0.5, eps),
        "burg_simplex_step": (x, g, 0.5, eps),
        "l1sq_box_step": (xb, g, 0.5, lo, hi),
    }


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dims", type=int, nargs="+", default=[10, 100, 1000])
    p.add_argument("--repeat", type=int, default=2000)
    args = p.parse_args()
    if _ckernels is None:
        print("compiled kernels not built; only the NumPy backend is available")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'d':>6}{'python us':>12}{'cython us':>12}{'speedup':>9}")
    for d in args.dims:
        for name, call_args in cases(d, rng).items():
            py = timeit.timeit(lambda: getattr(_kernels_py, name)(*call_args), number=args.repeat)
            py_us = 1e6 * py / args.repeat
            if _ckernels is None:
                print(f"{name:<24}{d:>6}{py_us:>12.2f}{'-':>12}{'-':>9}")
                continue
            cy = timeit.timeit(lambda: getattr(_ckernels, name)(*call_args), number=args.repeat)
            cy_us = 1e6 * cy / args.repeat
            print(f"{name:<24}{d:>6}{py_us:>12.2f}{cy_us:>12.2f}{py_us / cy_us:>8.1f}x")


if __name__ == "__main__":
    main()
