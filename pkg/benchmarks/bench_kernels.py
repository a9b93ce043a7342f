"""Compare the compiled and NumPy backends on the two hot kernels.

Usage: python3 benchmarks/bench_kernels.py [--repeat R]

Sizes mirror the bundled scenarios: the eight-kernel reference field with
four agents (S3, cross-estimates on) and the 100-kernel grid with five
agents (S1, full vectors).
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from fieldnet import _backend

CASES = {
    "s3 reference (N=4, M=2)": dict(n=4, m=2, cross=True),
    "s2 grid p=100 (N=5, M=20)": dict(n=5, m=20, cross=False),
    "s1 grid p=100 (N=5, M=100)": dict(n=5, m=100, cross=False, zeta=1.0),
}


def tick_args(rng, n, m, cross, zeta=0.0):
    lam = np.zeros((n, m, m))
    parent = np.full((n, n), -1, dtype=np.int64)
    for j in range(n):
        for i in range(n):
            if i != j:
                parent[j, i] = (i - 1) % n
    lap = 2 * np.eye(n) - np.roll(np.eye(n), 1, 1) - np.roll(np.eye(n), -1, 1)
    return [lam, np.zeros((n, m)), rng.normal(size=(n, m)),
            np.zeros((n, n, m)) if cross else np.zeros((1, 1, 1)),
            rng.uniform(size=(4, n, m)), rng.uniform(size=(4, n, n, m)) if cross else None,
            rng.uniform(size=(4, n)), np.ones(n), np.ones((n, m)), zeta, lap, parent, 1.0, 1e-3]


def bench(fn, number, repeat):
    return min(timeit.repeat(fn, number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = _backend.available_backends()
    if "compiled" not in backends:
        print("compiled extension not built; only the NumPy backend is available", file=sys.stderr)
    rng = np.random.default_rng(0)
    print(f"active backend: {_backend.BACKEND} (FIELDNET_BACKEND={os.environ.get('FIELDNET_BACKEND', '')!r})")
    print(f"{'kernel':<46}" + "".join(f"{name:>14}" for name in backends) + f"{'speedup':>10}")

    def row(label, timings):
        speed = timings["python"] / timings["compiled"] if "compiled" in timings else float("nan")
        print(f"{label:<46}" + "".join(f"{timings[n] * 1e6:>11.1f} us" for n in backends) + f"{speed:>9.1f}x")

    pts = rng.uniform(size=(20, 2))
    for p in (8, 100, 196):
        centres = rng.uniform(size=(p, 2))
        inv = np.full(p, 1.0 / 0.05**2)
        row(f"gaussian_kernels 20 pts, p={p}",
            {n: bench(lambda mod=mod: mod.gaussian_kernels(pts, centres, inv), 200, args.repeat)
             for n, mod in backends.items()})

    for label, case in CASES.items():
        timings = {}
        for n, mod in backends.items():
            a = tick_args(rng, **case)
            timings[n] = bench(lambda mod=mod, a=a: mod.estimator_tick(*a), 50, args.repeat)
        row(f"estimator_tick {label}", timings)

    # whole simulation, one process per backend so the import-time choice applies
    script = ("import time; from fieldnet import config, engine; "
              "cfg = config.parse('[scenario]\\nalgorithm = s3\\nseed = 3\\nduration = 3.0\\n'); "
              "t = time.perf_counter(); engine.run(engine.build_scenario(cfg), keep_logs=False); "
              "print(time.perf_counter() - t)")
    timings = {}
    for n in backends:
        env = dict(os.environ, FIELDNET_BACKEND="python" if n == "python" else "")
        out = subprocess.run([sys.executable, "-c", script], env=env, capture_output=True, text=True, check=True)
        timings[n] = float(out.stdout)
    print(f"{'s3 reference run, 3 s simulated':<46}" + "".join(f"{timings[n]:>12.2f} s" for n in backends)
          + (f"{timings['python'] / timings['compiled']:>9.1f}x" if "compiled" in timings else ""))


if __name__ == "__main__":
    main()
