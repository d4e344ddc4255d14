"""Time the numba and numpy kernel backends side by side.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--end-to-end]

Kernel timings call the ``*_np`` and ``*_nb`` twins directly on the same
inputs and check that outputs match.  ``--end-to-end`` also times a small IM
sweep in two subprocesses, one per ``PURESTATE_NUMBA`` setting.
"""
from __future__ import annotations

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from purestate import kernels

SWEEP = """
import time
from purestate.harness import parse_config, run_sweep
cfg = parse_config('''experiment = im_sweep
preset = geometric-gaps
dims = [4]
budgets = [2000]
m_policy = fixed(4)
trials_per_cell = 200
master_seed = 1''')
t = time.perf_counter()
run_sweep(cfg, write=False)
print(time.perf_counter() - t)
"""


def cases(rng):
    probs = rng.dirichlet(np.ones(16), size=20_000)
    u = rng.random((20_000, 8))
    x = kernels.categorical_draws_np(probs, u)
    p = rng.random(200)
    ub = rng.random((200, 5_000))
    return {
        "categorical_draws (20000x16, m=8)": ("categorical_draws", (probs, u)),
        "collision_stats (20000x8, d=16)": ("collision_stats", (x, 16)),
        "collision_from_uniforms (20000x16, m=8)": ("collision_from_uniforms", (probs, u)),
        "bernoulli_sums (200x5000)": ("bernoulli_sums", (p, ub)),
    }


def best_of(fn, args, repeat):
    return min(timeit.repeat(lambda: fn(*args), number=1, repeat=repeat))


def bench_kernels(repeat):
    rng = np.random.default_rng(0)
    print(f"{'kernel':42s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for label, (name, args) in cases(rng).items():
        f_np = getattr(kernels, f"{name}_np")
        t_np = best_of(f_np, args, repeat)
        if kernels.numba is None:
            print(f"{label:42s} {t_np * 1e3:10.2f} {'n/a':>10s} {'':>8s}")
            continue
        f_nb = getattr(kernels, f"{name}_nb")
        f_nb(*args)  # compile outside the timed region
        if not np.array_equal(f_np(*args), f_nb(*args)):
            raise SystemExit(f"{name}: backends disagree")
        t_nb = best_of(f_nb, args, repeat)
        print(f"{label:42s} {t_np * 1e3:10.2f} {t_nb * 1e3:10.2f} {t_np / t_nb:7.1f}x")


def bench_sweep():
    for flag in ("0", "1"):
        env = dict(os.environ, PURESTATE_NUMBA=flag)
        out = subprocess.run([sys.executable, "-c", SWEEP], env=env, capture_output=True,
                             text=True, check=True)
        label = "numba" if flag == "1" else "numpy"
        print(f"IM sweep, 200 trials, {label:5s}: {float(out.stdout):.2f} s (includes JIT warm-up)")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--end-to-end", action="store_true")
    args = ap.parse_args(argv)
    print(f"numba available: {kernels.numba is not None}")
    bench_kernels(args.repeat)
    if args.end_to_end:
        bench_sweep()


if __name__ == "__main__":
    main()
