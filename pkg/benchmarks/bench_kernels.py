"""Numba vs numpy timings for the three hot kernels.

    python3 benchmarks/bench_kernels.py [--M 32 --N 32 --taps 4 --repeat 200]

Both paths are called directly, so the OTFSMU_DISABLE_NUMBA flag does not
matter here. The first numba call (compilation or cache load) is excluded.
"""
import argparse
import timeit

import numpy as np

from otfsmu import kernels


def _inputs(M, N, n_taps, seed=0):
    rng = np.random.default_rng(seed)
    g = (rng.standard_normal(n_taps) + 1j * rng.standard_normal(n_taps)) / np.sqrt(2 * n_taps)
    pos = rng.choice(16, n_taps, replace=False)
    l, k = (pos % 4).astype(np.int64), (pos // 4).astype(np.int64)
    X = rng.standard_normal((M, N)) + 1j * rng.standard_normal((M, N))
    s = X.reshape(-1, order="F").copy()
    cells = np.arange(M * N, dtype=np.int64)
    return g, l, k, X, s, cells


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=32)
    ap.add_argument("--N", type=int, default=32)
    ap.add_argument("--taps", type=int, default=4)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()

    g, l, k, X, s, cells = _inputs(args.M, args.N, args.taps)
    cases = {
        "twisted_conv": (kernels.twisted_conv_numpy, kernels.twisted_conv_numba, (X, g, l, k)),
        "time_channel": (kernels.time_channel_numpy, kernels.time_channel_numba, (s, g, l, k)),
        "effective_triplets": (
            kernels.effective_triplets_numpy,
            kernels.effective_triplets_numba,
            (g, l, k, cells, args.M, args.N),
        ),
    }
    print(f"M={args.M} N={args.N} taps={args.taps} repeat={args.repeat}")
    print(f"{'kernel':<20}{'numpy us':>12}{'numba us':>12}{'speedup':>10}{'max diff':>12}")
    for name, (f_np, f_nb, call_args) in cases.items():
        ref, fast = f_np(*call_args), f_nb(*call_args)  # warm-up / compile
        ref = ref[-1] if isinstance(ref, tuple) else ref
        fast = fast[-1] if isinstance(fast, tuple) else fast
        diff = float(np.max(np.abs(np.asarray(ref) - np.asarray(fast))))
        t_np = min(timeit.repeat(lambda: f_np(*call_args), number=args.repeat, repeat=3)) / args.repeat
        t_nb = min(timeit.repeat(lambda: f_nb(*call_args), number=args.repeat, repeat=3)) / args.repeat
        print(f"{name:<20}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}{t_np / t_nb:>10.1f}{diff:>12.2e}")


if __name__ == "__main__":
    main()
