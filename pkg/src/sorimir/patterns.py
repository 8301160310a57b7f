"""Word-like note tokens, n-gram pattern mining, and per-pattern F0 analysis.

Each note becomes one token `<pitch-name>:<duration>` (rests as `R:<duration>`,
durations as lowest-terms rationals), so recurring melodic figures can be
counted as contiguous n-grams and their sung realizations compared across
daemok via beat-aligned F0 contours.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .beat_grid import BeatGrid, slice_track
from .errors import ConfigurationError, DependencyError, NotEnoughDataError
from .pitch_track import F0Track
from .score import NoteEvent, Pitch, fraction_str, parse_pitch_name, pitch_name

REST_STEP = "R"
DEFAULT_N_VALUES = (2, 3, 4, 6)
DEFAULT_MIN_SUPPORT = 2
DEFAULT_SAMPLES_PER_CONTOUR = 200


def make_token(pitch: Pitch | None, duration: Fraction) -> str:
    if duration <= 0:
        raise ValueError(f"duration {duration} must be > 0")
    head = REST_STEP if pitch is None else pitch_name(pitch)
    return f"{head}:{fraction_str(duration)}"


@lru_cache(maxsize=65536)
def parse_token(text: str) -> tuple[Pitch | None, Fraction]:
    """Inverse of `make_token`; rejects tokens not in canonical form."""
    head, sep, dur_text = text.partition(":")
    if not sep:
        raise ValueError(f"token {text!r} has no ':' separator")
    try:
        duration = Fraction(dur_text)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"token {text!r} has unparseable duration {dur_text!r}") from None
    pitch = None if head == REST_STEP else parse_pitch_name(head)
    canonical = make_token(pitch, duration)
    if canonical != text:
        raise ValueError(f"token {text!r} is not canonical (expected {canonical!r})")
    return pitch, duration


def tokenize(events: Sequence[NoteEvent]) -> list[str]:
    """One token per (tie-merged) event; bijective with (pitch, duration)."""
    return [make_token(e.pitch, e.duration_beats) for e in events]


def detokenize(tokens: Sequence[str]) -> list[tuple[Pitch | None, Fraction]]:
    return [parse_token(t) for t in tokens]


@dataclass(frozen=True)
class NGramPattern:
    tokens: tuple[str, ...]

    def __post_init__(self):
        if len(self.tokens) < 2:
            raise ValueError("an n-gram pattern needs n >= 2 tokens")
        for t in self.tokens:
            parse_token(t)

    @property
    def n(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def span_beats(self) -> Fraction:
        return sum((parse_token(t)[1] for t in self.tokens), Fraction(0))

    @classmethod
    def from_text(cls, text: str) -> "NGramPattern":
        return cls(tuple(text.split()))


@dataclass(frozen=True)
class PatternOccurrence:
    daemok_id: str
    start_event_index: int
    onset_beats: Fraction
    span_beats: Fraction


@dataclass(frozen=True)
class PatternIndex:
    """Mined patterns sorted by descending support (ties by token text)."""

    patterns: tuple[NGramPattern, ...]
    occurrences: Mapping[NGramPattern, tuple[PatternOccurrence, ...]]
    n_values: tuple[int, ...]
    min_support: int

    def support(self, pattern: NGramPattern) -> int:
        return len(self.occurrences.get(pattern, ()))

    def per_daemok_support(self, pattern: NGramPattern) -> dict[str, int]:
        counts: dict[str, int] = {}
        for occ in self.occurrences.get(pattern, ()):
            counts[occ.daemok_id] = counts.get(occ.daemok_id, 0) + 1
        return counts

    def __len__(self) -> int:
        return len(self.patterns)


def mine_ngrams(
    sequences: Mapping[str, Sequence[str]],
    n_values: Sequence[int] = DEFAULT_N_VALUES,
    min_support: int = DEFAULT_MIN_SUPPORT,
) -> PatternIndex:
    """Count every contiguous n-token window across all sequences.

    Patterns below `min_support` total occurrences are dropped. The result
    is independent of the mapping's key order: occurrence lists are sorted
    by (daemok_id, onset) and patterns by descending support, ties broken
    by token text.
    """
    if not n_values:
        raise ConfigurationError("n_values must not be empty")
    if any(n < 2 for n in n_values):
        raise ConfigurationError(f"n-gram lengths must be >= 2, got {sorted(n_values)}")
    if min_support < 1:
        raise ConfigurationError(f"min_support must be >= 1, got {min_support}")

    ids = sorted(sequences)
    # Prefix sums of token durations give each window's onset and span.
    cumsums: dict[str, list[Fraction]] = {}
    for daemok_id in ids:
        acc = Fraction(0)
        cum = [acc]
        for t in sequences[daemok_id]:
            acc += parse_token(t)[1]
            cum.append(acc)
        cumsums[daemok_id] = cum

    found: dict[tuple[str, ...], list[PatternOccurrence]] = {}
    for n in sorted(set(n_values)):
        if all(len(sequences[i]) < n for i in ids):
            warnings.warn(f"no sequence is long enough for {n}-grams", stacklevel=2)
            continue
        for daemok_id in ids:
            tokens = tuple(sequences[daemok_id])
            cum = cumsums[daemok_id]
            for start in range(len(tokens) - n + 1):
                occ = PatternOccurrence(
                    daemok_id=daemok_id,
                    start_event_index=start,
                    onset_beats=cum[start],
                    span_beats=cum[start + n] - cum[start],
                )
                found.setdefault(tokens[start : start + n], []).append(occ)

    kept = {NGramPattern(k): tuple(o) for k, o in found.items() if len(o) >= min_support}
    ordered = tuple(sorted(kept, key=lambda p: (-len(kept[p]), p.text)))
    return PatternIndex(
        patterns=ordered,
        occurrences=kept,
        n_values=tuple(sorted(set(n_values))),
        min_support=min_support,
    )


@dataclass(frozen=True)
class Contour:
    """One occurrence's F0 in cents on a normalized beat axis (NaN = unvoiced)."""

    values: np.ndarray
    daemok_id: str
    onset_beats: Fraction
    span_beats: Fraction

    @property
    def is_all_missing(self) -> bool:
        return bool(np.all(np.isnan(self.values)))

    @property
    def label(self) -> str:
        return f"{self.daemok_id} @ {fraction_str(self.onset_beats)}"


def _resample_to_normalized(beats: np.ndarray, cents: np.ndarray, samples: int) -> np.ndarray:
    """Linear resampling onto `samples` uniform points over the sampled range.

    A target falling between two voiced frames is interpolated; a target
    next to any unvoiced frame stays NaN so gaps are never bridged.
    """
    out = np.full(samples, np.nan)
    n = beats.shape[0]
    if n == 0:
        return out
    if n == 1 or beats[-1] == beats[0]:
        out[:] = cents[0]
        return out
    targets = beats[0] + (beats[-1] - beats[0]) * np.linspace(0.0, 1.0, samples)
    left = np.clip(np.searchsorted(beats, targets, side="right") - 1, 0, n - 2)
    right = left + 1
    y0 = cents[left]
    y1 = cents[right]
    both = ~np.isnan(y0) & ~np.isnan(y1)
    width = beats[right] - beats[left]
    frac = np.where(width > 0, (targets - beats[left]) / np.where(width > 0, width, 1.0), 0.0)
    vals = y0 + (y1 - y0) * np.clip(frac, 0.0, 1.0)
    out[both] = vals[both]
    return out


def occurrence_contours(
    index: PatternIndex,
    pattern: NGramPattern,
    grids: Mapping[str, BeatGrid],
    tracks: Mapping[str, F0Track],
    samples_per_contour: int = DEFAULT_SAMPLES_PER_CONTOUR,
    reference_hz: float = 440.0,
) -> list[Contour]:
    """Beat-aligned cents contour of every occurrence of `pattern`.

    Occurrences whose span runs past the annotated beat grid are skipped
    with a warning (the grid cannot place them in time). Fully unvoiced
    slices yield all-missing contours and are kept.
    """
    if samples_per_contour < 2:
        raise ConfigurationError("samples_per_contour must be >= 2")
    if pattern not in index.occurrences:
        raise ConfigurationError(f"pattern {pattern.text!r} is not in the index")

    contours: list[Contour] = []
    for occ in index.occurrences[pattern]:
        if occ.daemok_id not in grids:
            raise DependencyError(f"no beat grid for daemok '{occ.daemok_id}'")
        if occ.daemok_id not in tracks:
            raise DependencyError(f"no F0 track for daemok '{occ.daemok_id}'")
        grid = grids[occ.daemok_id]
        start = float(occ.onset_beats)
        end = float(occ.onset_beats + occ.span_beats)
        if start < 0 or end > grid.last_beat:
            warnings.warn(
                f"occurrence at {occ.daemok_id} beat {start} runs past the annotated grid; skipped",
                stacklevel=2,
            )
            continue
        segment = slice_track(tracks[occ.daemok_id], grid, start, end)
        values = _resample_to_normalized(
            segment.beats, segment.cents(reference_hz), samples_per_contour
        )
        contours.append(
            Contour(
                values=values,
                daemok_id=occ.daemok_id,
                onset_beats=occ.onset_beats,
                span_beats=occ.span_beats,
            )
        )
    return contours


def occurrence_vibrato(
    index: PatternIndex,
    pattern: NGramPattern,
    grids: Mapping[str, BeatGrid],
    tracks: Mapping[str, F0Track],
    reference_hz: float = 440.0,
) -> list[tuple[PatternOccurrence, "VibratoMetrics | None"]]:
    """Vibrato metrics of each occurrence's time-domain slice.

    Occurrences with too little voiced data (or beyond the grid) report
    None instead of metrics.
    """
    if pattern not in index.occurrences:
        raise ConfigurationError(f"pattern {pattern.text!r} is not in the index")
    results: list[tuple[PatternOccurrence, VibratoMetrics | None]] = []
    for occ in index.occurrences[pattern]:
        if occ.daemok_id not in grids:
            raise DependencyError(f"no beat grid for daemok '{occ.daemok_id}'")
        if occ.daemok_id not in tracks:
            raise DependencyError(f"no F0 track for daemok '{occ.daemok_id}'")
        grid = grids[occ.daemok_id]
        start = float(occ.onset_beats)
        end = float(occ.onset_beats + occ.span_beats)
        if start < 0 or end > grid.last_beat:
            results.append((occ, None))
            continue
        segment = slice_track(tracks[occ.daemok_id], grid, start, end)
        try:
            metrics = vibrato_metrics(segment.cents(reference_hz), segment.hop_s)
        except NotEnoughDataError:
            metrics = None
        results.append((occ, metrics))
    return results


@dataclass(frozen=True)
class VibratoMetrics:
    rate_hz: float
    depth_cents: float
    voiced_fraction: float


def _moving_average(values: np.ndarray, voiced: np.ndarray, window: int) -> np.ndarray:
    kernel = np.ones(window)
    sums = np.convolve(np.where(voiced, values, 0.0), kernel, mode="same")
    counts = np.convolve(voiced.astype(float), kernel, mode="same")
    return np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)


def vibrato_metrics(
    cents: np.ndarray,
    hop_s: float,
    detrend_window_s: float = 0.25,
    min_voiced_s: float = 0.3,
) -> VibratoMetrics:
    """Rate and depth of periodic pitch modulation in a cents series.

    The series is detrended by a centered moving average; the detrended
    zero crossings set the rate and delimit cycles, and depth is the mean
    per-cycle half peak-to-peak excursion of the raw series (measuring on
    the raw series avoids the detrender's passband ripple).
    """
    cents = np.asarray(cents, dtype=np.float64)
    voiced = np.isfinite(cents)
    n_voiced = int(np.count_nonzero(voiced))
    voiced_duration = n_voiced * hop_s
    if voiced_duration < min_voiced_s:
        raise NotEnoughDataError(
            f"{voiced_duration:.3f}s of voiced data < {min_voiced_s}s minimum"
        )

    window = max(1, int(round(detrend_window_s / hop_s)))
    if window % 2 == 0:
        window += 1
    trend = _moving_average(cents, voiced, window)
    detrended = np.where(voiced, cents - trend, np.nan)

    comp = detrended[voiced]
    raw = cents[voiced]
    signs = np.sign(comp)
    nonzero = signs != 0
    sign_seq = signs[nonzero]
    sign_pos = np.nonzero(nonzero)[0]
    changes = sign_seq[1:] != sign_seq[:-1]
    crossings = sign_pos[1:][changes]
    n_crossings = int(np.count_nonzero(changes))

    rate = n_crossings / (2.0 * voiced_duration)
    if n_crossings == 0:
        depth = 0.0
    elif n_crossings < 3:
        depth = float(raw.max() - raw.min()) / 2.0
    else:
        spans = [
            raw[crossings[i] : crossings[i + 2] + 1] for i in range(n_crossings - 2)
        ]
        depth = float(np.mean([(s.max() - s.min()) / 2.0 for s in spans]))
    return VibratoMetrics(
        rate_hz=rate,
        depth_cents=depth,
        voiced_fraction=n_voiced / cents.shape[0] if cents.shape[0] else 0.0,
    )


def onset_glide(cents: np.ndarray, hop_s: float, window_s: float = 0.3) -> float:
    """Signed cents rise over the first `window_s` of voiced data.

    Computed as the median of pairwise slopes (robust to vibrato wiggle)
    scaled by the window length; positive means ascending.
    """
    cents = np.asarray(cents, dtype=np.float64)
    voiced = np.isfinite(cents)
    idx = np.nonzero(voiced)[0]
    if idx.size == 0:
        raise NotEnoughDataError("no voiced frames")
    times = np.arange(cents.shape[0]) * hop_s
    t0 = times[idx[0]]
    sel = voiced & (times <= t0 + window_s + 1e-12)
    k = int(np.count_nonzero(sel))
    if k * hop_s < window_s - 1e-9:
        raise NotEnoughDataError(
            f"{k * hop_s:.3f}s of voiced data in the first {window_s}s window"
        )
    ts = times[sel]
    ys = cents[sel]
    i, j = np.triu_indices(k, k=1)
    slopes = (ys[j] - ys[i]) / (ts[j] - ts[i])
    return float(np.median(slopes)) * window_s


def find_post_rest_long_notes(events: Sequence[NoteEvent], min_duration_beats) -> list[int]:
    """Indices of notes >= `min_duration_beats` entered from a rest or piece start."""
    out = []
    for i, ev in enumerate(events):
        if ev.is_rest or ev.duration_beats < min_duration_beats:
            continue
        if i == 0 or events[i - 1].is_rest:
            out.append(i)
    return out
