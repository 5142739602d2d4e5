"""Time the numba kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--sizes 64 256 512] [--repeat 20]
"""
import argparse
import timeit

import numpy as np

from toposeg import kernels


def bench(fn, args, repeat):
    fn(*args)
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat)) * 1e3


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[64, 256, 512])
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if kernels.numba is None:
        raise SystemExit("numba is not installed; nothing to compare")
    kernels.warmup()
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<16}{'size':>6}{'numpy ms':>12}{'numba ms':>12}{'speedup':>9}")
    for n in args.sizes:
        u = rng.random((n, n))
        wh, wv = rng.random((n, n - 1)), rng.random((n - 1, n))
        mh = (rng.random((n, n - 1)) < 0.6).astype(float)
        mv = (rng.random((n - 1, n)) < 0.6).astype(float)
        cases = [
            ("weighted_step", kernels.weighted_step_numpy, kernels.weighted_step_numba, (u, wh, wv, 0.2)),
            ("edge_components", kernels.edge_components_numpy, kernels.edge_components_numba, (mh, mv)),
        ]
        for name, slow, fast, a in cases:
            t_np, t_nb = bench(slow, a, args.repeat), bench(fast, a, args.repeat)
            print(f"{name:<16}{n:>6}{t_np:>12.3f}{t_nb:>12.3f}{t_np / t_nb:>8.1f}x")


if __name__ == "__main__":
    main()
