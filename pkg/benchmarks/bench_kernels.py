"""Time the compiled CSS kernels against the pure-Python fallback.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each case calls the backend function directly with identical inputs, so
the numbers compare the kernels alone (no model search around them).
"""

import argparse
import importlib
import timeit

import numpy as np

from groupcast import _pykernels

try:
    _ckernels = importlib.import_module("groupcast._ckernels")
except ImportError:  # extension not built
    _ckernels = None


def cases(rng):
    w = rng.normal(size=236)
    ar = _pykernels.ar_polynomial(np.array([0.4, -0.2]), np.array([0.3]), 12)
    ma = _pykernels.ma_polynomial(np.array([0.5]), np.array([-0.3]), 12)
    x = np.array([0.4, -0.2, 0.5, 0.3, -0.3])
    coefs = np.array([0.5, -0.2, 0.1, 0.05])
    return {
        "is_stable (4 coefs)": lambda k: k.is_stable(coefs, 1.001),
        "css_residuals (T=236, s=12)": lambda k: k.css_residuals(w, ar, ma, 0.0, 0),
        "css_objective (2,0,1)(1,0,1)^12": lambda k: k.css_objective(x, w, 2, 1, 1, 1, 12, False, 0, 1.001),
        "fit_css (1,0,1) from zero": lambda k: k.fit_css(w, 1, 1, 0, 0, 1, True, 0, np.zeros(3), 0.1,
                                                          2000, 1e-5, 1e-9, 1.001, 1),
    }


def best_time(fn, repeat):
    number = 1
    while timeit.timeit(fn, number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    print(f"{'kernel':36s} {'python':>12s} {'cython':>12s} {'speedup':>9s}")
    for name, call in cases(rng).items():
        tp = best_time(lambda: call(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:36s} {tp * 1e6:10.1f}us {'n/a':>12s} {'':>9s}")
            continue
        tc = best_time(lambda: call(_ckernels), args.repeat)
        print(f"{name:36s} {tp * 1e6:10.1f}us {tc * 1e6:10.1f}us {tp / tc:8.1f}x")


if __name__ == "__main__":
    main()
