"""Benchmark the numba kernels against the pure-numpy fallbacks.

Times the Gaussian-mixture posterior-mean kernel and full sampler runs on
both backends, plus per-trial throughput at the two benchmark system sizes.

    python benchmarks/bench_backends.py [--trials 20]
"""

import argparse
import time

import numpy as np

import jedmimo as jm
from jedmimo._backend import HAS_NUMBA
from jedmimo.kernels import posterior_mean
from jedmimo.model import complex_normal


def time_fn(fn, repeats):
    fn()  # warm up (includes jit compilation on the numba path)
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats


def bench_posterior_mean(backend, qpsk):
    rng = np.random.default_rng(0)
    x = complex_normal(rng, (32, 128))
    return time_fn(lambda: posterior_mean(x, qpsk.points, 0.3, backend=backend), 200)


def bench_run_jed(backend, qpsk, n_rx, n_users, n_pilots, n_data, trials):
    dims = jm.SystemDims(n_rx, n_users, n_pilots, n_data)
    sigma0 = jm.sigma0_from_snr(25.0, dims)
    cfg = jm.make_config(dims, sigma0, preset="high-snr")

    def one(t):
        rng = np.random.default_rng((42, t))
        H = jm.sample_channel(jm.IidGaussianChannel(), dims, rng)
        Xp = jm.sample_symbols(qpsk, n_users, n_pilots, rng)
        Xd = jm.sample_symbols(qpsk, n_users, n_data, rng)
        Y = jm.forward(H, np.concatenate([Xp, Xd], axis=1), sigma0, rng)
        jm.run_jed(Y, Xp, cfg, jm.GaussianChannelPrior(1.0), qpsk, rng, backend=backend)

    one(0)  # warm up
    t0 = time.perf_counter()
    for t in range(trials):
        one(t + 1)
    return (time.perf_counter() - t0) / trials


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--trials", type=int, default=20)
    args = parser.parse_args()

    qpsk = jm.make_constellation(4)
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    if not HAS_NUMBA:
        print("numba not importable; benchmarking the numpy fallback only")

    print(f"{'benchmark':<44s}" + "".join(f"{b:>12s}" for b in backends))
    rows = [
        ("posterior_mean 32x128, QPSK", lambda b: bench_posterior_mean(b, qpsk)),
        ("run_jed 4x2 P4 D8, L=300 T=3",
         lambda b: bench_run_jed(b, qpsk, 4, 2, 4, 8, args.trials)),
        ("run_jed 16x4 P8 D32, L=300 T=3",
         lambda b: bench_run_jed(b, qpsk, 16, 4, 8, 32, args.trials)),
    ]
    for name, bench in rows:
        times = {b: bench(b) for b in backends}
        line = f"{name:<44s}" + "".join(f"{times[b] * 1e3:>10.2f}ms" for b in backends)
        if len(backends) == 2:
            line += f"   ({times['numpy'] / times['numba']:.1f}x)"
        print(line)


if __name__ == "__main__":
    main()
