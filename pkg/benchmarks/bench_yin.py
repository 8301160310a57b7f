#!/usr/bin/env python3
"""Benchmark the YIN lag-search kernel: numba @njit vs. pure-numpy fallback.

Usage:
    python3 benchmarks/bench_yin.py [--seconds 30] [--repeats 3]

The numpy path is always timed; the numba path is timed when available
(compile time is excluded by a warm-up call). Setting SORIMIR_DISABLE_NUMBA=1
only affects which path the library itself dispatches to, not this script.
"""

import argparse
import time

import numpy as np

from sorimir import _kernels

SR = 44100
WINDOW = 2029   # 46 ms
HOP = 441       # 10 ms
TAU_MIN = 41    # ~1076 Hz
TAU_MAX = 147   # 300 Hz
THRESHOLD = 0.15


def make_signal(seconds: float) -> np.ndarray:
    rng = np.random.default_rng(0)
    t = np.arange(int(seconds * SR)) / SR
    f0 = 520.0 * 2.0 ** ((40.0 / 1200.0) * np.sin(2 * np.pi * 5.5 * t))
    phase = 2 * np.pi * np.cumsum(f0) / SR
    x = 0.6 * np.sin(phase) + 0.15 * np.sin(2 * phase) + 0.01 * rng.standard_normal(t.shape)
    return np.ascontiguousarray(x)


def bench(kernel, x, repeats):
    timings = []
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = kernel(x, WINDOW, HOP, TAU_MIN, TAU_MAX, THRESHOLD)
        timings.append(time.perf_counter() - start)
    return min(timings), result


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seconds", type=float, default=30.0)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    x = make_signal(args.seconds)
    n_frames = (x.shape[0] - (WINDOW + TAU_MAX)) // HOP + 1
    print(f"signal: {args.seconds:.0f}s at {SR} Hz -> {n_frames} frames "
          f"(window {WINDOW}, hop {HOP}, lags {TAU_MIN}..{TAU_MAX})")

    t_np, (lags_np, min_np) = bench(_kernels.yin_lag_search_numpy, x, args.repeats)
    print(f"numpy : {t_np * 1e3:8.1f} ms  ({n_frames / t_np:,.0f} frames/s)")

    if _kernels.yin_lag_search_numba is None:
        print("numba : unavailable (not installed or disabled)")
        return

    _kernels.yin_lag_search_numba(x[: WINDOW + TAU_MAX + HOP], WINDOW, HOP,
                                  TAU_MIN, TAU_MAX, THRESHOLD)  # compile
    t_nb, (lags_nb, min_nb) = bench(_kernels.yin_lag_search_numba, x, args.repeats)
    print(f"numba : {t_nb * 1e3:8.1f} ms  ({n_frames / t_nb:,.0f} frames/s)")
    print(f"speedup: {t_np / t_nb:.1f}x")

    voiced = ~np.isnan(lags_np)
    agree = np.array_equal(voiced, ~np.isnan(lags_nb)) and np.allclose(
        lags_np[voiced], lags_nb[voiced], rtol=1e-9, atol=1e-9
    )
    print(f"paths agree on {int(voiced.sum())} voiced frames: {agree}")


if __name__ == "__main__":
    main()
