"""Time the numba and numpy chi-square kernels on the same inputs.

    python3 benchmarks/bench_kernels.py --n 4096 --D 50 100 1000 --repeat 5
"""

import argparse
import timeit

import numpy as np

from maxidetect import _kernels


def bench(fn, args, repeat):
    fn(*args)  # warm-up (and JIT compile)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=4096, help="replications per call (one engine block)")
    p.add_argument("--D", type=int, nargs="+", default=[10, 100, 1000])
    p.add_argument("--m", type=int, default=2, help="statistics per replication")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    if _kernels.chi2_statistics_numba is None:
        print("numba backend unavailable; timing numpy only")
    rng = np.random.default_rng(args.seed)
    print(f"{'D':>6} {'numpy ms':>10} {'numba ms':>10} {'speedup':>8} {'max |diff|':>11}")
    for D in args.D:
        z = rng.standard_normal((args.n, D))
        means = rng.uniform(0, 0.1, D)
        w = np.vstack([np.arange(1, D + 1.0) ** 0.5] * args.m)
        call = (z, means, 0.1, w)
        t_np = bench(_kernels.chi2_statistics_numpy, call, args.repeat)
        if _kernels.chi2_statistics_numba is None:
            print(f"{D:>6} {1e3 * t_np:>10.3f} {'-':>10} {'-':>8} {'-':>11}")
            continue
        t_nb = bench(_kernels.chi2_statistics_numba, call, args.repeat)
        diff = np.max(np.abs(_kernels.chi2_statistics_numpy(*call) - _kernels.chi2_statistics_numba(*call)))
        print(f"{D:>6} {1e3 * t_np:>10.3f} {1e3 * t_nb:>10.3f} {t_np / t_nb:>8.2f} {diff:>11.2e}")


if __name__ == "__main__":
    main()
