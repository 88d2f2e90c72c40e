"""Time the numba kernels against the pure-numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--sizes 300,600,1500] [--repeat 5]

Each kernel is called once before timing so JIT compilation is excluded.
"""

import argparse
import time

import numpy as np

from tsne_dynamics import kernels
from tsne_dynamics._backend import HAS_NUMBA
from tsne_dynamics.affinity import joint_affinities
from tsne_dynamics.datagen import gmm_preset


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(n, repeat):
    data = gmm_preset(n=n, seed=0)
    P, _ = joint_affinities(data.data, 30.0)
    rng = np.random.default_rng(0)
    Y = rng.standard_normal((n, 2)) * 1e-2
    D = kernels.sq_dists_numpy(data.data)
    log_target = np.log(30.0)
    cases = {
        "tsne_step": (lambda: kernels.tsne_step_numba(P, Y, 4.0, 1.0),
                      lambda: kernels.tsne_step_numpy(P, Y, 4.0, 1.0)),
        "max_sq_dist": (lambda: kernels.max_sq_dist_numba(Y),
                        lambda: kernels.max_sq_dist_numpy(Y)),
        "sq_dists": (lambda: kernels.sq_dists_numba(data.data),
                     lambda: kernels.sq_dists_numpy(data.data)),
        "calibrate": (lambda: kernels.calibrate_numba(D, log_target, -40.0, 40.0, 1e-5, 100),
                      lambda: kernels.calibrate_numpy(D, log_target, -40.0, 40.0, 1e-5, 100)),
    }
    for name, (fast, slow) in cases.items():
        t_numpy = best_of(slow, repeat)
        if HAS_NUMBA:
            t_numba = best_of(fast, repeat)
            print(f"n={n:5d} {name:12s} numpy {t_numpy * 1e3:9.3f} ms   "
                  f"numba {t_numba * 1e3:9.3f} ms   speedup {t_numpy / t_numba:6.2f}x")
        else:
            print(f"n={n:5d} {name:12s} numpy {t_numpy * 1e3:9.3f} ms   numba unavailable")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="300,600,1500")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    for n in (int(s) for s in args.sizes.split(",")):
        bench(n, args.repeat)


if __name__ == "__main__":
    main()
