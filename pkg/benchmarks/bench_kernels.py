"""Time the sum-product kernel: numba vs numpy.

    python3 benchmarks/bench_kernels.py [--n 200000] [--iters 20] [--repeat 3]

The numba timing excludes the first (compiling) call.  Both kernels start
from the same messages and must agree to ~1e-6 before timings are printed.
"""
import argparse
import time

import numpy as np

from mimo_noma.coding import BUILTIN_PROFILES, build_code, encode
from mimo_noma.coding.kernels import HAVE_NUMBA, bp_run_numba, bp_run_numpy


def setup(n, seed=0):
    ens = BUILTIN_PROFILES[1.0].ensemble
    rng = np.random.default_rng(seed)
    g = build_code(ens, seed=seed, n=n)
    x = 1.0 - 2.0 * encode(g, rng.integers(0, 2, g.k))
    v = 6.0  # below the code's waterfall, so no early exit
    llr = 2.0 * (x + np.sqrt(v) * rng.standard_normal(g.n_bits)) / v
    intr = llr[: g.q * g.k].reshape(g.q, g.k).sum(axis=0)
    lpar = np.ascontiguousarray(llr[g.q * g.k:])
    return g, intr, lpar


def timed(fn, g, intr, lpar, iters):
    c2v = np.zeros((g.m, g.alpha))
    c2pl = np.zeros(g.m)
    c2pr = np.zeros(g.m)
    t = time.perf_counter()
    fn(intr, lpar, np.ascontiguousarray(g.chk), c2v, c2pl, c2pr, iters)
    return time.perf_counter() - t, c2v


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200_000)
    ap.add_argument("--iters", type=int, default=20)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    g, intr, lpar = setup(args.n)
    print(f"code: N={g.n_bits} K={g.k} edges={g.n_edges}, {args.iters} iterations")
    t_np, ref = min((timed(bp_run_numpy, g, intr, lpar, args.iters) for _ in range(args.repeat)),
                    key=lambda r: r[0])
    print(f"numpy : {t_np:8.3f} s")
    if not HAVE_NUMBA:
        print("numba : unavailable (not installed or MIMO_NOMA_DISABLE_NUMBA set)")
        return
    timed(bp_run_numba, g, intr, lpar, 1)  # compile
    t_nb, got = min((timed(bp_run_numba, g, intr, lpar, args.iters) for _ in range(args.repeat)),
                    key=lambda r: r[0])
    err = float(np.max(np.abs(got - ref)))
    print(f"numba : {t_nb:8.3f} s   speedup {t_np / t_nb:5.2f}x   max |diff| {err:.2e}")


if __name__ == "__main__":
    main()
