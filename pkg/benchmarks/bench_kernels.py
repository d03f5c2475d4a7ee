"""Time the compiled kernels against the NumPy fallback on solver-sized inputs.

Usage: python benchmarks/bench_kernels.py [--n 32] [--repeat 5]
"""

from __future__ import annotations

import argparse
import timeit

import numpy as np

from mhd3s import _fallback

try:
    from mhd3s import _kernels
except ImportError:  # extension not built
    _kernels = None


def _inputs(n: int, rng: np.random.Generator):
    shape = (n, n, n)
    fields = 0.1 * rng.standard_normal((7,) + shape)
    gr = rng.standard_normal((3,) + shape)
    gu = rng.standard_normal((3, 3) + shape)
    gb = rng.standard_normal((3, 3) + shape)
    modes = n * n * (n // 2 + 1)
    U = np.linalg.qr(rng.standard_normal((modes, 7, 7)))[0]
    lam = rng.standard_normal((modes, 7))
    v = rng.standard_normal((7, modes)) + 1j * rng.standard_normal((7, modes))
    return (fields, gr, gu, gb, 0.1, 0.03, 5.0 / 3.0), (U, lam, v, 0.01)


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=32)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    pw, mp = _inputs(args.n, np.random.default_rng(0))
    backends = [("numpy", _fallback)] + ([("compiled", _kernels)] if _kernels is not None else [])
    print(f"grid {args.n}^3, best of {args.repeat}")
    results = {}
    for kernel, call_args in (("mhd_pointwise", pw), ("mode_propagate", mp)):
        for name, mod in backends:
            fn = getattr(mod, kernel)
            t = min(timeit.repeat(lambda: fn(*call_args), number=1, repeat=args.repeat))
            results[(kernel, name)] = (t, fn(*call_args))
            print(f"{kernel:<15} {name:<9} {1e3 * t:9.2f} ms")
        if _kernels is not None:
            (tn, a), (tc, b) = results[(kernel, "numpy")], results[(kernel, "compiled")]
            print(f"{kernel:<15} speedup   {tn / tc:9.2f}x   max |diff| {np.max(np.abs(a - b)):.2e}")
    if _kernels is None:
        print("compiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
