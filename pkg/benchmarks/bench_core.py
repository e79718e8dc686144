"""Time the compiled core against the numpy fallback on the hot kernels.

Usage::

    python benchmarks/bench_core.py [--n 400] [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from cfgp import backend


def cases(n, rng):
    X = rng.uniform(0, 1, (n, 2))
    T = rng.uniform(0.1, 1, (n, 1))
    phi = np.array([1.5, 3.0])
    a, l = np.array([1.0]), np.array([4.0])
    return {
        "corr_matrix gaussian": lambda c: c.corr_matrix(X, X, phi, 0),
        "corr_matrix matern25": lambda c: c.corr_matrix(X, X, phi, 3),
        "corr_grad matern15": lambda c: c.corr_grad(X, X, phi, 2),
        "fidelity_matrix": lambda c: c.fidelity_matrix(T, T, a, l, 0.3),
        "fidelity_grad": lambda c: c.fidelity_grad(T, T, a, l, 0.3),
        "w_matrix gaussian": lambda c: c.w_matrix(X, X, phi, 0),
        "w_matrix matern25": lambda c: c.w_matrix(X, X, phi, 3),
        "line_integrals matern05": lambda c: c.line_integrals(X, phi, 1),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if "cython" not in backend.available:
        raise SystemExit("compiled core not built; run `pip install -e . --no-build-isolation` first")
    py, cy = backend.get("python"), backend.get("cython")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<26} {'python ms':>10} {'cython ms':>10} {'speed-up':>9}")
    for name, fn in cases(args.n, rng).items():
        tp = min(timeit.repeat(lambda: fn(py), number=1, repeat=args.repeat)) * 1e3
        tc = min(timeit.repeat(lambda: fn(cy), number=1, repeat=args.repeat)) * 1e3
        print(f"{name:<26} {tp:>10.2f} {tc:>10.2f} {tp / tc:>8.1f}x")


if __name__ == "__main__":
    main()
