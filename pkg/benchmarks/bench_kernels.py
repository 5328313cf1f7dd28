"""Compare the compiled kernels with the pure-Python fallback.

Times the Kalman filter + RTS smoother pass and the two inner splitting
loops on a dataset-A sized problem, for every available backend, and checks
that the backends return the same numbers.

    python benchmarks/bench_kernels.py [--K 1000] [--repeat 5]
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from dglasso import InnerConfig, ModelParams, make_dataset, smoothing_stats
from dglasso._backend import available_backends
from dglasso.inner import solve_A_update, solve_P_update
from dglasso.solver import default_init_A, default_init_P


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), statistics.median(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--K", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--xi", type=float, default=1e-6, help="inner stopping tolerance")
    args = ap.parse_args(argv)

    gt, train, _ = make_dataset("A", seed=0, K=args.K)
    params = ModelParams(default_init_A(9), default_init_P(9), gt.spec.observation_model())
    stats = smoothing_stats(params, train)
    cfg = InnerConfig(xi=args.xi)

    cases = {
        f"KF+RTS+stats (K={args.K})": lambda b: smoothing_stats(params, train, b).Psi,
        f"A update (xi={args.xi:g})": lambda b: solve_A_update(
            params.A, params.P, stats, 10.0, 1.0, args.K, cfg, fallback=True, backend=b).solution,
        f"P update (xi={args.xi:g})": lambda b: solve_P_update(
            params.A, params.P, stats, 10.0, 1.0, args.K, cfg, fallback=True, backend=b).solution,
    }
    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'kernel':28s} " + " ".join(f"{b + ' best [ms]':>16s}" for b in backends) + "  speedup  max|diff|")
    for name, fn in cases.items():
        res = {b: best_of(lambda: fn(b), args.repeat) for b in backends}
        cells = " ".join(f"{1e3 * res[b][0]:16.2f}" for b in backends)
        if len(backends) == 2:
            speed = res["python"][0] / res["ext"][0]
            diff = float(np.max(np.abs(res["python"][2] - res["ext"][2])))
            print(f"{name:28s} {cells}  {speed:6.1f}x  {diff:.1e}")
        else:
            print(f"{name:28s} {cells}")


if __name__ == "__main__":
    main()
