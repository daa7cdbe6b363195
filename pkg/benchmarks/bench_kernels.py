"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Prints the best-of-``repeat`` wall time per kernel and backend, the speedup,
and the largest absolute difference between the two outputs.
"""

import argparse
import time

import numpy as np

from xcsge import kernels


def best_time(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(rng):
    n_ref, n_query, F, J = 4000, 2000, 6, 8
    ref_X = rng.normal(size=(n_ref, F))
    ref_Y = rng.random((n_ref, J))
    query_X = rng.normal(size=(n_query, F))
    yield "knn_mean (4000 ref, 2000 query, k=50)", lambda b: b.knn_mean(ref_X, ref_Y, query_X, 50)
    yield "knn_mean leave-one-out (4000, k=9)", lambda b: b.knn_mean(ref_X, ref_Y, ref_X, 9, True)

    N, T, M = 20000, 8, 2
    P = rng.normal(size=(N, J, T, M))
    wg = rng.dirichlet(np.ones(J), size=M).T
    wk = rng.dirichlet(np.ones(J), size=(T, M)).transpose(2, 0, 1)
    Q = rng.random((N, J, M))
    yield "fuse (20000 x 8 members x 8 leadtimes x 2)", lambda b: b.fuse(P, wg, wk, Q, 2.0, 1e-9)[0]
    yield "fuse with weights", lambda b: b.fuse(P, wg, wk, Q, 2.0, 1e-9, True)[1]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (default {kernels.BACKEND})")
    if "cython" not in backends:
        print("compiled extension not built; timing the fallback only")
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':46s} {'python':>10s} {'cython':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, fn in cases(rng):
        t_py, out_py = best_time(lambda: fn(kernels.get_backend("python")), args.repeat)
        if "cython" in backends:
            t_cy, out_cy = best_time(lambda: fn(kernels.get_backend("cython")), args.repeat)
            diff = float(np.max(np.abs(out_py - out_cy)))
            print(f"{name:46s} {t_py * 1e3:8.1f}ms {t_cy * 1e3:8.1f}ms {t_py / t_cy:7.1f}x {diff:10.1e}")
        else:
            print(f"{name:46s} {t_py * 1e3:8.1f}ms {'-':>10s} {'-':>8s} {'-':>10s}")


if __name__ == "__main__":
    main()
