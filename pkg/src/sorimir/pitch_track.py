"""Fundamental-frequency tracks: estimation, import, filtering, conversion.

A track is a uniformly sampled sequence of (f0, confidence) frames; frame i
sits at time i * hop_s. Unvoiced frames carry f0 = 0 and are excluded from
all downstream statistics. Neural trackers are not run here; their CSV
output (time,frequency,confidence) can be imported instead.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ._kernels import yin_lag_search
from .errors import ConfigurationError, DomainError, EmptyTrackError, FormatError

DEFAULT_HOP_S = 0.010
DEFAULT_FRAME_S = 0.046
DEFAULT_YIN_THRESHOLD = 0.15
DEFAULT_SEARCH_MIN_HZ = 60.0
DEFAULT_SEARCH_MAX_HZ = 1600.0

_HOP_JITTER_S = 1e-3


@dataclass(frozen=True)
class F0Frame:
    time_s: float
    f0_hz: float
    confidence: float

    @property
    def voiced(self) -> bool:
        return self.f0_hz > 0.0


@dataclass(frozen=True)
class F0Track:
    """Uniform F0 track; arrays are read-only after construction."""

    f0_hz: np.ndarray
    confidence: np.ndarray
    hop_s: float

    def __post_init__(self):
        f0 = np.array(self.f0_hz, dtype=np.float64)
        conf = np.array(self.confidence, dtype=np.float64)
        if f0.ndim != 1 or conf.shape != f0.shape:
            raise ValueError("f0_hz and confidence must be 1-d arrays of equal length")
        if self.hop_s <= 0:
            raise ValueError(f"hop_s must be positive, got {self.hop_s}")
        if np.any(~np.isfinite(f0)) or np.any(f0 < 0):
            raise ValueError("f0 values must be finite and >= 0 (0 marks unvoiced)")
        if np.any((conf < 0) | (conf > 1)):
            raise ValueError("confidence values must lie in [0, 1]")
        f0.flags.writeable = False
        conf.flags.writeable = False
        object.__setattr__(self, "f0_hz", f0)
        object.__setattr__(self, "confidence", conf)

    def __len__(self) -> int:
        return self.f0_hz.shape[0]

    def __getitem__(self, i: int) -> F0Frame:
        return F0Frame(i * self.hop_s, float(self.f0_hz[i]), float(self.confidence[i]))

    def times(self) -> np.ndarray:
        return np.arange(len(self)) * self.hop_s

    @property
    def voiced(self) -> np.ndarray:
        return self.f0_hz > 0.0

    @property
    def n_voiced(self) -> int:
        return int(np.count_nonzero(self.voiced))


@dataclass(frozen=True)
class FilterConfig:
    """Confidence and register gates applied to raw tracker output."""

    min_confidence: float = 0.6
    min_hz: float = 350.0
    max_hz: float = 1000.0

    def __post_init__(self):
        if not 0.0 <= self.min_confidence <= 1.0:
            raise ValueError(f"min_confidence {self.min_confidence} outside [0, 1]")
        if not 0.0 < self.min_hz < self.max_hz:
            raise ValueError(f"need 0 < min_hz < max_hz, got {self.min_hz}..{self.max_hz}")


def estimate_f0_yin(
    samples: np.ndarray,
    sample_rate: float,
    frame_s: float = DEFAULT_FRAME_S,
    hop_s: float = DEFAULT_HOP_S,
    search_min_hz: float = DEFAULT_SEARCH_MIN_HZ,
    search_max_hz: float = DEFAULT_SEARCH_MAX_HZ,
    threshold: float = DEFAULT_YIN_THRESHOLD,
) -> F0Track:
    """Deterministic YIN estimate of a mono signal's F0 track.

    Per frame: the cumulative-mean-normalized difference function is scanned
    for its first dip below `threshold`; the dip is refined by parabolic
    interpolation and confidence is 1 - CMNDF at the refined lag. Frames
    without a dip come out unvoiced with confidence 0.
    """
    x = np.ascontiguousarray(samples, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigurationError("expected a mono (1-d) sample array")
    if x.size == 0:
        raise EmptyTrackError("cannot estimate F0 of an empty signal")
    if sample_rate < 8000:
        raise ConfigurationError(f"sample rate {sample_rate} Hz < 8000 Hz minimum")
    if not 0 < search_min_hz < search_max_hz:
        raise ConfigurationError(f"bad search range {search_min_hz}..{search_max_hz} Hz")

    window = int(round(frame_s * sample_rate))
    hop = int(round(hop_s * sample_rate))
    if window < 2 or hop < 1:
        raise ConfigurationError(f"frame {frame_s}s / hop {hop_s}s too small at {sample_rate} Hz")
    if window < 2.0 * sample_rate / search_min_hz:
        raise ConfigurationError(
            f"frame of {window} samples covers fewer than 2 periods of {search_min_hz} Hz"
        )
    tau_min = max(2, int(np.ceil(sample_rate / search_max_hz)))
    tau_max = int(np.floor(sample_rate / search_min_hz))
    if tau_max <= tau_min:
        raise ConfigurationError(
            f"search range {search_min_hz}..{search_max_hz} Hz collapses at {sample_rate} Hz"
        )
    span = window + tau_max
    if x.size < span:
        raise EmptyTrackError(f"signal of {x.size} samples is shorter than one analysis frame ({span})")

    lags, minima = yin_lag_search(x, window, hop, tau_min, tau_max, threshold)
    voiced = ~np.isnan(lags)
    f0 = np.zeros(lags.shape[0])
    conf = np.zeros(lags.shape[0])
    f0[voiced] = sample_rate / lags[voiced]
    conf[voiced] = np.clip(1.0 - minima[voiced], 0.0, 1.0)
    return F0Track(f0, conf, hop_s=hop / sample_rate)


def import_f0_csv(text) -> F0Track:
    """Read a `time,frequency,confidence` CSV into an F0Track.

    The hop is inferred from the first two rows; rows must start at time 0,
    increase strictly, and keep hop jitter within 1 ms. Frequency 0 marks an
    unvoiced frame.
    """
    if hasattr(text, "read"):
        text = text.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip() for h in header] != ["time", "frequency", "confidence"]:
        raise FormatError("expected CSV header 'time,frequency,confidence'")

    times: list[float] = []
    freqs: list[float] = []
    confs: list[float] = []
    for row_no, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 3:
            raise FormatError(f"expected 3 columns, got {len(row)}", row=row_no)
        try:
            t, f, c = (float(v) for v in row)
        except ValueError:
            raise FormatError(f"non-numeric value in {row!r}", row=row_no) from None
        if f < 0:
            raise FormatError(f"negative frequency {f}", row=row_no)
        if not 0.0 <= c <= 1.0:
            raise DomainError(f"confidence {c} outside [0, 1] (row {row_no})")
        times.append(t)
        freqs.append(f)
        confs.append(c)

    if not times:
        return F0Track(np.zeros(0), np.zeros(0), hop_s=DEFAULT_HOP_S)
    if abs(times[0]) > _HOP_JITTER_S:
        raise FormatError(f"track must start at time 0, got {times[0]}", row=1)
    hop = times[1] - times[0] if len(times) > 1 else DEFAULT_HOP_S
    if hop <= 0:
        raise FormatError(f"non-increasing time {times[1]}", row=2)
    for i in range(1, len(times)):
        delta = times[i] - times[i - 1]
        if delta <= 0:
            raise FormatError(f"non-increasing time {times[i]}", row=i + 1)
        if abs(delta - hop) > _HOP_JITTER_S:
            raise FormatError(f"hop jitter {abs(delta - hop):.6f}s exceeds 1 ms", row=i + 1)
    return F0Track(np.asarray(freqs), np.asarray(confs), hop_s=hop)


def export_f0_csv(track: F0Track) -> str:
    """Serialize a track back to the canonical CSV form."""
    lines = ["time,frequency,confidence"]
    times = track.times()
    for i in range(len(track)):
        lines.append(f"{times[i]:.4f},{track.f0_hz[i]:.3f},{track.confidence[i]:.6f}")
    return "\n".join(lines) + "\n"


def filter_track(track: F0Track, config: FilterConfig = FilterConfig()) -> F0Track:
    """Gate frames by confidence and register, preserving the time base.

    A frame survives iff confidence >= min_confidence and
    min_hz <= f0 <= max_hz (bounds inclusive). Rejected frames become
    unvoiced placeholders (f0 = 0, confidence = 0) so slicing by beat keeps
    uniform sampling. Idempotent.
    """
    keep = (
        (track.confidence >= config.min_confidence)
        & (track.f0_hz >= config.min_hz)
        & (track.f0_hz <= config.max_hz)
    )
    return F0Track(
        np.where(keep, track.f0_hz, 0.0),
        np.where(keep, track.confidence, 0.0),
        hop_s=track.hop_s,
    )


def hz_to_cents(f0_hz, reference_hz):
    """1200 * log2(f0 / reference); accepts scalars or arrays of positives."""
    f0 = np.asarray(f0_hz, dtype=np.float64)
    if reference_hz <= 0 or np.any(f0 <= 0):
        raise DomainError("hz_to_cents requires strictly positive frequencies")
    cents = 1200.0 * np.log2(f0 / reference_hz)
    return float(cents) if np.isscalar(f0_hz) else cents


def track_cents(track: F0Track, reference_hz: float = 440.0) -> np.ndarray:
    """Per-frame cents relative to `reference_hz`, NaN where unvoiced."""
    if reference_hz <= 0:
        raise DomainError("reference frequency must be positive")
    out = np.full(len(track), np.nan)
    voiced = track.voiced
    out[voiced] = 1200.0 * np.log2(track.f0_hz[voiced] / reference_hz)
    return out


def load_wav(path) -> tuple[np.ndarray, int]:
    """Read a RIFF WAVE file as float64 mono in [-1, 1]; stereo is averaged."""
    from scipy.io import wavfile

    sample_rate, data = wavfile.read(path)
    data = np.asarray(data)
    if data.dtype == np.int16:
        data = data / 2.0**15
    elif data.dtype == np.int32:
        data = data / 2.0**31
    elif data.dtype == np.uint8:
        data = (data.astype(np.float64) - 128.0) / 128.0
    if data.ndim == 2:
        data = data.mean(axis=1)
    return np.ascontiguousarray(data, dtype=np.float64), int(sample_rate)
