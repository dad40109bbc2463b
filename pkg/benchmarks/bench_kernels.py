"""Time the numba and pure-numpy kernel backends on the same inputs.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Each kernel is compiled and warmed up once before timing, so the numbers
exclude JIT compilation.  Results of both backends are compared first.
"""
import argparse
import json
import sys
import timeit

import numpy as np

from maxlim import _accel
from maxlim import kernels as k


def _cases(rng):
    p, q = 60, 80
    s = np.sort(rng.uniform(0, 1, p))
    t = np.sort(rng.uniform(0, 1, q))
    F = np.maximum.accumulate(rng.pareto(1.0, p + 1))
    G = np.maximum.accumulate(rng.pareto(1.0, q + 1))
    P = np.column_stack((np.linspace(0, 1, 1500), np.sort(rng.random(1500))))
    Q = np.column_stack((np.linspace(0, 1, 1200), np.sort(rng.random(1200))))
    osc_t = np.sort(rng.uniform(0, 1, 400))
    osc_l = rng.uniform(0, 3, 401)
    phi = np.array([0.7, -0.1])
    innov = rng.normal(size=10 ** 6)
    return {
        "j1_lattice": ((F, G, s, t), k.j1_lattice_jit, k.j1_lattice_np),
        "frechet_linf": ((P, Q), k.frechet_linf_jit, k.frechet_linf_np),
        "oscillation": ((osc_l, osc_t, 0.05), k.oscillation_jit, k.oscillation_np),
        "ar_filter": ((phi, innov[:2].copy(), innov), k.ar_filter_jit, k.ar_filter_np),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json")
    args = ap.parse_args(argv)
    if not _accel.HAVE_NUMBA:
        print("numba is not installed; nothing to compare", file=sys.stderr)
        return 1
    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':<14}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (a, jit, npy) in _cases(rng).items():
        r1, r2 = jit(*a), npy(*a)
        if not np.allclose(r1, r2, rtol=1e-12, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        tj = min(timeit.repeat(lambda: jit(*a), number=1, repeat=args.repeat)) * 1e3
        tn = min(timeit.repeat(lambda: npy(*a), number=1, repeat=args.repeat)) * 1e3
        rows.append({"kernel": name, "numba_ms": tj, "numpy_ms": tn, "speedup": tn / tj})
        print(f"{name:<14}{tj:>12.3f}{tn:>12.3f}{tn / tj:>9.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
