"""Hot numeric kernels with numba- and numpy-backed implementations.

The YIN lag search dominates runtime on real recordings, so it has two
interchangeable implementations: tight loops compiled with numba's @njit,
and a vectorized pure-numpy fallback. Set SORIMIR_DISABLE_NUMBA=1 to force
the numpy path (also used automatically when numba is unavailable).
Both paths implement the same arithmetic; see benchmarks/bench_yin.py.
"""

from __future__ import annotations

import os

import numpy as np

DISABLE_ENV = "SORIMIR_DISABLE_NUMBA"


def _yin_lag_search(x, window, hop, tau_min, tau_max, threshold):
    """Per-frame YIN lag estimate from the normalized difference function.

    For each frame the cumulative-mean-normalized difference function
    (CMNDF) is evaluated over lags 1..tau_max; the first lag dipping below
    `threshold` (searched from tau_min) is walked down to its local minimum
    and refined by parabolic interpolation. Returns (lags, cmndf_minima)
    with lag = NaN and minimum = 1.0 for frames without a dip.
    """
    n = x.shape[0]
    span = window + tau_max
    n_frames = (n - span) // hop + 1
    lags = np.full(n_frames, np.nan)
    minima = np.ones(n_frames)
    d = np.empty(tau_max + 1)
    dprime = np.empty(tau_max + 1)

    for i in range(n_frames):
        s = i * hop
        d[0] = 0.0
        dprime[0] = 1.0
        running = 0.0
        for tau in range(1, tau_max + 1):
            acc = 0.0
            for j in range(window):
                diff = x[s + j] - x[s + j + tau]
                acc += diff * diff
            d[tau] = acc
            running += acc
            dprime[tau] = d[tau] * tau / running if running > 0.0 else 1.0

        tau_d = -1
        for tau in range(tau_min, tau_max + 1):
            if dprime[tau] < threshold:
                tau_d = tau
                break
        if tau_d < 0:
            continue
        while tau_d + 1 <= tau_max and dprime[tau_d + 1] < dprime[tau_d]:
            tau_d += 1

        lag = float(tau_d)
        val = dprime[tau_d]
        if tau_d - 1 >= 1 and tau_d + 1 <= tau_max:
            y0 = dprime[tau_d - 1]
            y1 = dprime[tau_d]
            y2 = dprime[tau_d + 1]
            denom = y0 - 2.0 * y1 + y2
            if denom > 0.0:
                delta = 0.5 * (y0 - y2) / denom
                if -1.0 < delta < 1.0:
                    lag = tau_d + delta
                    val = y1 - 0.25 * (y0 - y2) * delta
        lags[i] = lag
        minima[i] = val

    return lags, minima


def yin_lag_search_numpy(x, window, hop, tau_min, tau_max, threshold):
    """Vectorized twin of `_yin_lag_search` (same contract, same results)."""
    n = x.shape[0]
    span = window + tau_max
    n_frames = (n - span) // hop + 1
    starts = np.arange(n_frames) * hop
    frames = np.lib.stride_tricks.sliding_window_view(x, span)[starts]
    base = frames[:, :window]

    d = np.empty((n_frames, tau_max + 1))
    d[:, 0] = 0.0
    for tau in range(1, tau_max + 1):
        diff = base - frames[:, tau : tau + window]
        d[:, tau] = np.einsum("ij,ij->i", diff, diff)

    running = np.cumsum(d[:, 1:], axis=1)
    dprime = np.ones_like(d)
    np.divide(
        d[:, 1:] * np.arange(1, tau_max + 1, dtype=float),
        running,
        out=dprime[:, 1:],
        where=running > 0.0,
    )

    below = dprime < threshold
    below[:, :tau_min] = False
    has_dip = below.any(axis=1)
    tau_first = np.argmax(below, axis=1)

    # Walk each first dip down to its local minimum: the stop lag is the
    # first t >= tau_first with dprime[t+1] >= dprime[t], else tau_max.
    non_decreasing = dprime[:, 1:] >= dprime[:, :-1]
    eligible = non_decreasing & (np.arange(tau_max)[None, :] >= tau_first[:, None])
    stop_found = eligible.any(axis=1)
    tau_star = np.where(stop_found, np.argmax(eligible, axis=1), tau_max)

    lags = np.full(n_frames, np.nan)
    minima = np.ones(n_frames)
    rows = np.nonzero(has_dip)[0]
    ts = tau_star[rows]
    lag = ts.astype(float)
    val = dprime[rows, ts]

    inner = (ts >= 2) & (ts + 1 <= tau_max)
    r_in, t_in = rows[inner], ts[inner]
    y0 = dprime[r_in, t_in - 1]
    y1 = dprime[r_in, t_in]
    y2 = dprime[r_in, t_in + 1]
    denom = y0 - 2.0 * y1 + y2
    delta = np.where(denom > 0.0, 0.5 * (y0 - y2) / np.where(denom > 0.0, denom, 1.0), 0.0)
    delta[np.abs(delta) >= 1.0] = 0.0
    refined = delta != 0.0
    lag_in = lag[inner]
    val_in = val[inner]
    lag_in[refined] = t_in[refined] + delta[refined]
    val_in[refined] = y1[refined] - 0.25 * (y0[refined] - y2[refined]) * delta[refined]
    lag[inner] = lag_in
    val[inner] = val_in

    lags[rows] = lag
    minima[rows] = val
    return lags, minima


def _numba_enabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() not in ("1", "true", "yes")


yin_lag_search_numba = None
if _numba_enabled():
    try:
        from numba import njit

        yin_lag_search_numba = njit(cache=True)(_yin_lag_search)
    except ImportError:
        yin_lag_search_numba = None

USING_NUMBA = yin_lag_search_numba is not None
yin_lag_search = yin_lag_search_numba if USING_NUMBA else yin_lag_search_numpy
