#!/usr/bin/env python3
"""Time the hot kernels under both backends (numba njit vs pure numpy).

Usage:
    python benchmarks/bench_kernels.py [--quick]

The same arrays go through both code paths; reported numbers are the best
of three repetitions after a warm-up call (the warm-up also absorbs numba's
one-time JIT compilation).
"""

import argparse
import time

import numpy as np

from tokselect import accel, frontend


def best_of(fn, repeats=3):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench(name, make_args, fn, backends, repeats):
    args = make_args()
    row = {"name": name}
    for backend in backends:
        accel.set_backend(backend)
        fn(*args)  # warm-up / JIT
        row[backend] = best_of(lambda: fn(*args), repeats)
    return row


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--quick", action="store_true", help="smaller problem sizes")
    args = parser.parse_args()

    if not accel.HAVE_NUMBA:
        print("numba is not installed; only the numpy path can run")
    backends = ["numpy"] + (["numba"] if accel.HAVE_NUMBA else [])
    scale = 0.25 if args.quick else 1.0
    rng = np.random.default_rng(0)

    n_frames = int(200_000 * scale)
    n_fft_rows = int(20_000 * scale)
    rows = [
        bench(
            f"nearest_centroid {n_frames}x8 vs 512",
            lambda: (rng.normal(size=(n_frames, 8)), rng.normal(size=(512, 8))),
            accel.nearest_centroid,
            backends,
            3,
        ),
        bench(
            f"nearest_centroid {n_frames // 4}x80 vs 256",
            lambda: (rng.normal(size=(n_frames // 4, 80)), rng.normal(size=(256, 80))),
            accel.nearest_centroid,
            backends,
            3,
        ),
        bench(
            f"accumulate_clusters {n_frames}x80 k=256",
            lambda: (
                rng.normal(size=(n_frames, 80)),
                rng.integers(0, 256, size=n_frames),
                256,
            ),
            accel.accumulate_clusters,
            backends,
            3,
        ),
        bench(
            f"fft_batch {n_fft_rows}x400 -> 512",
            lambda: (rng.normal(size=(n_fft_rows, 400)),),
            lambda frames: accel.fft_batch(frames, 512),
            backends,
            3,
        ),
        bench(
            f"logmel {int(60 * scale)}s of audio",
            lambda: (0.1 * rng.standard_normal(int(60 * scale) * 16000),),
            lambda samples: frontend.logmel(samples),
            backends,
            3,
        ),
    ]

    width = max(len(r["name"]) for r in rows)
    header = f"{'kernel':<{width}}  " + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for r in rows:
        line = f"{r['name']:<{width}}  " + "".join(f"{r[b] * 1e3:>10.1f}ms" for b in backends)
        if len(backends) == 2:
            line += f"{r['numpy'] / r['numba']:>9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
