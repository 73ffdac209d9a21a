"""Timing comparison of the compiled and pure-Python backend kernels.

Runs each hot kernel on identical inputs under every available backend
and reports median wall times plus the python/cython ratio, then an
end-to-end training comparison in subprocesses (the backend is fixed at
import time, so each end-to-end run needs a fresh interpreter).

    python3 benchmarks/bench_backends.py [--n 262144] [--reps 7]
"""

import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from mcmklr.backend import available_backends


def _inputs(n, rng):
    z = rng.standard_normal(n)
    dz = rng.standard_normal(n)
    y = (rng.random(n) < 0.5).astype(np.float64)
    mask = np.ones(n)
    p = rng.uniform(0.01, 0.99, size=n)
    spec = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    eig = rng.standard_normal(n)
    sqd = rng.random((256, n // 256 * 4 or 4)) * 2.0
    alpha = rng.standard_normal(sqd.shape[1])
    return {
        "probs_and_logloss": (z, y, mask),
        "trial_logloss": (z, dz, 0.5, y, mask),
        "tau_sum": (p, mask),
        "spectral_shifted_divide": (spec, eig, 3.0, 1e-12),
        "exp_vote": (sqd, 4.0, alpha),
    }


def _median_time(fn, args, reps):
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def bench_kernels(n, reps):
    backends = available_backends()
    rng = np.random.default_rng(0)
    inputs = _inputs(n, rng)
    names = list(inputs)

    print(f"kernel timings, n = {n}, median of {reps} runs")
    header = f"{'kernel':<26}" + "".join(f"{b:>14}" for b in backends)
    if len(backends) > 1:
        header += f"{'py/cy':>10}"
    print(header)
    for name in names:
        times = {
            b: _median_time(getattr(mod, name), inputs[name], reps)
            for b, mod in backends.items()
        }
        row = f"{name:<26}" + "".join(f"{times[b] * 1e3:>12.3f}ms" for b in backends)
        if "python" in times and "cython" in times:
            row += f"{times['python'] / times['cython']:>10.2f}"
        print(row)


def bench_end_to_end(n, reps):
    code = (
        "from mcmklr.data_io import generate_checkerboard\n"
        "from mcmklr.kernel import RadialKernel\n"
        "from mcmklr.klr_fast import TrainConfig, train\n"
        "import mcmklr.backend as backend\n"
        f"ds = generate_checkerboard({n}, seed=0)\n"
        "cfg = TrainConfig(lambda_=1e-4, kernel=RadialKernel(sigma=256.0),"
        " t_max=5, eps=1e-300)\n"
        "best = min(train(ds, cfg).diagnostics['train_seconds']"
        f" for _ in range({reps}))\n"
        "print(f'{backend.BACKEND} {best:.4f}')\n"
    )
    print(f"\nend-to-end training, n = {n}, 5 forced iterations, best of {reps}")
    for name in available_backends():
        env = dict(os.environ, MCMKLR_BACKEND=name)
        proc = subprocess.run(
            [sys.executable, "-c", code], env=env, capture_output=True, text=True
        )
        if proc.returncode != 0:
            print(f"{name}: failed\n{proc.stderr}")
            continue
        print(f"  {proc.stdout.strip()}s")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=262144)
    ap.add_argument("--reps", type=int, default=7)
    args = ap.parse_args()
    bench_kernels(args.n, args.reps)
    bench_end_to_end(args.n, args.reps)


if __name__ == "__main__":
    main()
