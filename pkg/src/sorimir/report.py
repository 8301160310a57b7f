"""Figure rendering (SVG) and the end-to-end analysis pipeline.

All emitted artifacts are deterministic: identical inputs and settings
produce byte-identical files, and every output gets a provenance sidecar
recording input content hashes plus the exact settings used.
"""

from __future__ import annotations

import hashlib
import json
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .beat_grid import JangdanSpec, load_beats
from .errors import (
    IncompatibleContourError,
    IncompatibleHistogramError,
    PipelineError,
    SorimirError,
)
from .histogram import (
    MODE_FACTORIES,
    PitchHistogram,
    f0_histogram,
    mode_affinity,
    score_duration_histogram,
)
from .patterns import (
    Contour,
    NGramPattern,
    PatternIndex,
    mine_ngrams,
    occurrence_contours,
    occurrence_vibrato,
    tokenize,
)
from .pitch_track import (
    FilterConfig,
    estimate_f0_yin,
    filter_track,
    import_f0_csv,
    load_wav,
)
from .score import fraction_str, note_sequence, parse_musicxml

FIGURE_HISTOGRAM_PAIR = "histogram-pair"
FIGURE_CONTOUR_OVERLAY = "contour-overlay"

_PALETTE = ("#3b6ea5", "#c0573b", "#4e9151", "#9157a3", "#ae8b2d", "#50858b", "#a34f6f", "#6b6b6b")


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    width: int = 840
    height: int = 420
    series_labels: tuple[str, ...] = ("series",)

    def __post_init__(self):
        if self.kind not in (FIGURE_HISTOGRAM_PAIR, FIGURE_CONTOUR_OVERLAY):
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("figure dimensions must be positive")
        if not self.series_labels:
            raise ValueError("at least one series label is required")


def _fmt(x: float) -> str:
    if abs(x) < 0.005:
        x = 0.0
    return f"{x:.2f}"


class _Svg:
    """Tiny deterministic SVG assembler (fixed attribute order, 2-dp floats)."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts: list[str] = []

    def line(self, x1, y1, x2, y2, stroke="#303030", width=1.0):
        self.parts.append(
            f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
            f'stroke="{stroke}" stroke-width="{_fmt(width)}"/>'
        )

    def rect(self, x, y, w, h, fill, cls="bar"):
        self.parts.append(
            f'<rect class="{cls}" x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(w)}" '
            f'height="{_fmt(h)}" fill="{fill}"/>'
        )

    def circle(self, cx, cy, r, fill):
        self.parts.append(f'<circle cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="{_fmt(r)}" fill="{fill}"/>')

    def text(self, x, y, content, size=11, anchor="middle", fill="#202020", rotate=None):
        transform = ""
        if rotate is not None:
            transform = f' transform="rotate({_fmt(rotate)} {_fmt(x)} {_fmt(y)})"'
        self.parts.append(
            f'<text x="{_fmt(x)}" y="{_fmt(y)}" font-family="sans-serif" font-size="{size}" '
            f'text-anchor="{anchor}" fill="{fill}"{transform}>{escape(content)}</text>'
        )

    def polyline(self, points, stroke, width=1.5):
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in points)
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{_fmt(width)}"/>'
        )

    def document(self) -> str:
        body = "\n".join(f"  {p}" for p in self.parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
            f"{body}\n</svg>\n"
        )


_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 64, 16, 24, 56


def render_histogram_figure(
    f0_hist: PitchHistogram, score_hist: PitchHistogram, spec: FigureSpec | None = None
) -> str:
    """Two aligned bar series over a shared pitch axis.

    Each series is normalized to its own maximum because the units differ
    (frame counts vs. summed beats). Only nonzero bins produce <rect> data
    elements; identical inputs render to identical bytes.
    """
    if spec is None:
        spec = FigureSpec(FIGURE_HISTOGRAM_PAIR, series_labels=("f0 frames", "score beats"))
    if f0_hist.bin_kind != score_hist.bin_kind:
        raise IncompatibleHistogramError(
            f"cannot pair {f0_hist.bin_kind!r} with {score_hist.bin_kind!r} bins"
        )

    svg = _Svg(spec.width, spec.height)
    plot_w = spec.width - _MARGIN_L - _MARGIN_R
    plot_h = spec.height - _MARGIN_T - _MARGIN_B
    x0, y0 = _MARGIN_L, _MARGIN_T + plot_h

    svg.line(x0, y0, x0 + plot_w, y0)
    svg.line(x0, _MARGIN_T, x0, y0)
    svg.text(16, _MARGIN_T + plot_h / 2, "relative mass", size=11, rotate=-90.0)

    nonzero = sorted(
        set(b for b, v in f0_hist.masses.items() if v > 0)
        | set(b for b, v in score_hist.masses.items() if v > 0)
    )
    labels = list(spec.series_labels) + ["f0 frames", "score beats"]
    label_a, label_b = labels[0], labels[1]

    if not nonzero:
        svg.text(x0 + plot_w / 2, _MARGIN_T + plot_h / 2, "no data", size=14)
        return svg.document()

    bins = list(range(nonzero[0], nonzero[-1] + 1))
    slot = plot_w / len(bins)
    bar_w = slot * 0.38
    max_a = max((v for v in f0_hist.masses.values()), default=0.0)
    max_b = max((v for v in score_hist.masses.values()), default=0.0)

    for i, b in enumerate(bins):
        cx = x0 + (i + 0.5) * slot
        va = f0_hist.masses.get(b, 0.0)
        vb = score_hist.masses.get(b, 0.0)
        if va > 0 and max_a > 0:
            h = plot_h * va / max_a
            svg.rect(cx - bar_w, y0 - h, bar_w, h, _PALETTE[0])
        if vb > 0 and max_b > 0:
            h = plot_h * vb / max_b
            svg.rect(cx, y0 - h, bar_w, h, _PALETTE[1])
        step = max(1, len(bins) // 24)
        if i % step == 0:
            svg.text(cx, y0 + 16, f0_hist.bin_label(b), size=10)

    svg.circle(x0 + 10, _MARGIN_T + 2, 4, _PALETTE[0])
    svg.text(x0 + 18, _MARGIN_T + 6, label_a, size=11, anchor="start")
    svg.circle(x0 + 150, _MARGIN_T + 2, 4, _PALETTE[1])
    svg.text(x0 + 158, _MARGIN_T + 6, label_b, size=11, anchor="start")
    return svg.document()


def render_contour_overlay(contours: list[Contour], spec: FigureSpec | None = None) -> str:
    """Overlay of occurrence contours on the normalized beat axis.

    Missing values break a contour into separate polylines; the legend
    names each occurrence by daemok and onset.
    """
    if spec is None:
        spec = FigureSpec(
            FIGURE_CONTOUR_OVERLAY, series_labels=tuple(c.label for c in contours) or ("series",)
        )
    lengths = {c.values.shape[0] for c in contours}
    if len(lengths) > 1:
        raise IncompatibleContourError(f"contours have mismatched lengths {sorted(lengths)}")

    svg = _Svg(spec.width, spec.height)
    plot_w = spec.width - _MARGIN_L - _MARGIN_R
    plot_h = spec.height - _MARGIN_T - _MARGIN_B
    x0, y0 = _MARGIN_L, _MARGIN_T + plot_h

    svg.line(x0, y0, x0 + plot_w, y0)
    svg.line(x0, _MARGIN_T, x0, y0)
    svg.text(x0 + plot_w / 2, spec.height - 12, "normalized beat position", size=11)
    svg.text(16, _MARGIN_T + plot_h / 2, "cents", size=11, rotate=-90.0)

    finite = [v for c in contours for v in c.values[np.isfinite(c.values)]]
    if not contours or not finite:
        svg.text(x0 + plot_w / 2, _MARGIN_T + plot_h / 2, "no data", size=14)
        return svg.document()

    lo, hi = min(finite), max(finite)
    if hi - lo < 1.0:
        mid = (hi + lo) / 2.0
        lo, hi = mid - 0.5, mid + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def to_xy(k: int, v: float, n: int) -> tuple[float, float]:
        x = x0 + plot_w * (k / (n - 1) if n > 1 else 0.0)
        y = y0 - plot_h * (v - lo) / (hi - lo)
        return x, y

    for ci, contour in enumerate(contours):
        color = _PALETTE[ci % len(_PALETTE)]
        n = contour.values.shape[0]
        run: list[tuple[float, float]] = []
        for k in range(n):
            v = contour.values[k]
            if np.isfinite(v):
                run.append(to_xy(k, float(v), n))
            elif run:
                if len(run) > 1:
                    svg.polyline(run, color)
                run = []
        if len(run) > 1:
            svg.polyline(run, color)
        ly = _MARGIN_T + 2 + 14 * ci
        svg.circle(x0 + plot_w - 150, ly, 4, color)
        label = spec.series_labels[ci] if ci < len(spec.series_labels) else contour.label
        svg.text(x0 + plot_w - 142, ly + 4, label, size=10, anchor="start")

    for frac in (0.0, 0.5, 1.0):
        gx = x0 + plot_w * frac
        svg.line(gx, y0, gx, y0 + 4)
        svg.text(gx, y0 + 16, f"{frac:.1f}", size=10)
    svg.text(x0 - 6, y0 + 4, f"{lo:.0f}", size=10, anchor="end")
    svg.text(x0 - 6, _MARGIN_T + 8, f"{hi:.0f}", size=10, anchor="end")
    return svg.document()


def contours_csv(pattern: NGramPattern, contours: list[Contour]) -> str:
    """Long-format CSV dump of contour samples (empty cell = unvoiced)."""
    lines = ["pattern,daemok,onset_beats,sample_index,normalized_position,cents"]
    n = contours[0].values.shape[0] if contours else 0
    for c in contours:
        onset = fraction_str(c.onset_beats)
        for k in range(c.values.shape[0]):
            pos = k / (n - 1) if n > 1 else 0.0
            v = c.values[k]
            cell = "" if not np.isfinite(v) else f"{v:.6f}"
            lines.append(f"{pattern.text},{c.daemok_id},{onset},{k},{pos:.6f},{cell}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# pipeline


_DEFAULT_SETTINGS = {
    "filter": {"min_confidence": 0.6, "min_hz": 350.0, "max_hz": 1000.0},
    "reference_hz": 440.0,
    "tuning_offset_cents": 0.0,
    "jangdan": "joongmori",
    "beats_per_measure": 12,
    "merge_ties": True,
    "skip_rests": False,
    "n_values": [2, 3, 4, 6],
    "min_support": 2,
    "samples_per_contour": 200,
    "contour_patterns": [],
    "modes": ["ujo", "gyemyeonjo"],
    "yin": {},
}


@dataclass
class AnalysisBundle:
    """Everything one pipeline run produced, with provenance."""

    daemok_ids: tuple[str, ...]
    histograms: dict
    pattern_index: PatternIndex
    contour_sets: dict[str, list[Contour]]
    provenance: dict
    output_files: tuple[str, ...] = field(default_factory=tuple)


def _sha256(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _effective_reference(settings: dict) -> float:
    return float(settings["reference_hz"]) * 2.0 ** (
        float(settings["tuning_offset_cents"]) / 1200.0
    )


def load_manifest(manifest_path) -> tuple[list[dict], dict]:
    """Read and normalize a pipeline manifest (paths resolved to the file)."""
    path = Path(manifest_path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise PipelineError("manifest", "*", f"missing file {path}") from None
    except json.JSONDecodeError as exc:
        raise PipelineError("manifest", "*", f"invalid JSON in {path}: {exc}") from exc

    entries = raw.get("daemok")
    if not isinstance(entries, list) or not entries:
        raise PipelineError("manifest", "*", "manifest needs a non-empty 'daemok' list")
    settings = dict(_DEFAULT_SETTINGS)
    settings["filter"] = dict(_DEFAULT_SETTINGS["filter"])
    for key, value in raw.get("settings", {}).items():
        if key == "filter":
            settings["filter"].update(value)
        else:
            settings[key] = value

    base = path.parent
    normalized = []
    for entry in entries:
        daemok_id = entry.get("id")
        if not daemok_id or not isinstance(daemok_id, str):
            raise PipelineError("manifest", "*", "every daemok entry needs a string 'id'")
        if any(ch in daemok_id for ch in "/\\") or daemok_id.startswith("."):
            raise PipelineError("manifest", daemok_id, f"unsafe daemok id {daemok_id!r}")
        if "score" not in entry or "beats" not in entry:
            raise PipelineError("manifest", daemok_id, "entry needs 'score' and 'beats' paths")
        if ("f0_csv" in entry) == ("audio" in entry):
            raise PipelineError(
                "manifest", daemok_id, "entry needs exactly one of 'f0_csv' or 'audio'"
            )
        norm = {"id": daemok_id, "score": str(base / entry["score"]), "beats": str(base / entry["beats"])}
        if "f0_csv" in entry:
            norm["f0_csv"] = str(base / entry["f0_csv"])
        else:
            norm["audio"] = str(base / entry["audio"])
        normalized.append(norm)
    if len({e["id"] for e in normalized}) != len(normalized):
        raise PipelineError("manifest", "*", "duplicate daemok ids")
    return normalized, settings


def _load_daemok(entry: dict, settings: dict):
    daemok_id = entry["id"]
    try:
        score = parse_musicxml(Path(entry["score"]).read_bytes())
    except FileNotFoundError:
        raise PipelineError("score", daemok_id, f"missing file {entry['score']}") from None
    except SorimirError as exc:
        raise PipelineError("score", daemok_id, exc) from exc
    events = note_sequence(score, merge_ties=bool(settings["merge_ties"]))

    try:
        grid = load_beats(
            Path(entry["beats"]).read_text(),
            JangdanSpec(str(settings["jangdan"]), int(settings["beats_per_measure"])),
        )
    except FileNotFoundError:
        raise PipelineError("beats", daemok_id, f"missing file {entry['beats']}") from None
    except SorimirError as exc:
        raise PipelineError("beats", daemok_id, exc) from exc

    try:
        if "f0_csv" in entry:
            track = import_f0_csv(Path(entry["f0_csv"]).read_text())
        else:
            samples, sample_rate = load_wav(entry["audio"])
            track = estimate_f0_yin(samples, sample_rate, **settings["yin"])
        track = filter_track(track, FilterConfig(**settings["filter"]))
    except FileNotFoundError:
        missing = entry.get("f0_csv", entry.get("audio"))
        raise PipelineError("f0", daemok_id, f"missing file {missing}") from None
    except (SorimirError, TypeError, ValueError) as exc:
        raise PipelineError("f0", daemok_id, exc) from exc

    return score, events, grid, track


def run_pipeline(manifest_path, out_dir=None) -> AnalysisBundle:
    """Execute every analysis stage for every daemok in the manifest.

    Outputs land in `out_dir` (default: `out/` next to the manifest), each
    with a `.prov.json` sidecar. Any stage failure aborts the run without
    leaving partial outputs behind.
    """
    entries, settings = load_manifest(manifest_path)
    out_root = Path(out_dir) if out_dir is not None else Path(manifest_path).parent / "out"
    out_root.mkdir(parents=True, exist_ok=True)

    input_hashes = {}
    for entry in entries:
        for key in ("score", "beats", "f0_csv", "audio"):
            if key in entry:
                p = Path(entry[key])
                if not p.is_file():
                    raise PipelineError("inputs", entry["id"], f"missing file {p}")
                input_hashes[f"{entry['id']}:{key}"] = _sha256(p)

    provenance = {"inputs": input_hashes, "settings": settings}
    prov_text = _dump_json(provenance)
    reference = _effective_reference(settings)

    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out_root))
    outputs: dict[str, str] = {}

    def emit(name: str, text: str):
        outputs[name] = text
        outputs[name + ".prov.json"] = prov_text

    try:
        histograms: dict[str, dict] = {}
        events_by_id = {}
        grids = {}
        tracks = {}
        for entry in entries:
            daemok_id = entry["id"]
            _, events, grid, track = _load_daemok(entry, settings)
            events_by_id[daemok_id] = events
            grids[daemok_id] = grid
            tracks[daemok_id] = track

            try:
                f0_hist = f0_histogram(track, reference_hz=reference)
                score_hist = score_duration_histogram(events)
                affinities = {}
                for mode_name in settings["modes"]:
                    factory = MODE_FACTORIES.get(mode_name)
                    if factory is None:
                        raise PipelineError("histogram", daemok_id, f"unknown mode {mode_name!r}")
                    template = factory()
                    affinities[mode_name] = {
                        "f0": mode_affinity(f0_hist, template) if f0_hist.total_mass else None,
                        "score": mode_affinity(score_hist, template) if score_hist.total_mass else None,
                    }
                record = {
                    "daemok": daemok_id,
                    "f0_histogram": f0_hist.to_record(),
                    "score_histogram": score_hist.to_record(),
                    "affinities": affinities,
                }
                histograms[daemok_id] = record
                emit(f"{daemok_id}.histogram.json", _dump_json(record))
                emit(
                    f"{daemok_id}.histogram.svg",
                    render_histogram_figure(f0_hist, score_hist),
                )
            except PipelineError:
                raise
            except SorimirError as exc:
                raise PipelineError("histogram", daemok_id, exc) from exc

        try:
            sequences = {
                daemok_id: tokenize(
                    [e for e in evs if not (settings["skip_rests"] and e.is_rest)]
                )
                for daemok_id, evs in events_by_id.items()
            }
            index = mine_ngrams(
                sequences,
                n_values=tuple(settings["n_values"]),
                min_support=int(settings["min_support"]),
            )
            emit("patterns.json", _dump_json(pattern_index_record(index)))
        except PipelineError:
            raise
        except SorimirError as exc:
            raise PipelineError("patterns", "*", exc) from exc

        contour_sets: dict[str, list[Contour]] = {}
        for pi, pattern_text in enumerate(settings["contour_patterns"]):
            try:
                pattern = NGramPattern.from_text(pattern_text)
                contours = occurrence_contours(
                    index,
                    pattern,
                    grids,
                    tracks,
                    samples_per_contour=int(settings["samples_per_contour"]),
                    reference_hz=reference,
                )
                contour_sets[pattern_text] = contours
                stem = f"pattern-{pi:02d}"
                emit(f"{stem}.contours.csv", contours_csv(pattern, contours))
                emit(f"{stem}.overlay.svg", render_contour_overlay(contours))
                vib = occurrence_vibrato(index, pattern, grids, tracks, reference_hz=reference)
                vib_record = {
                    "pattern": pattern.text,
                    "occurrences": [
                        {
                            "daemok": occ.daemok_id,
                            "onset_beats": fraction_str(occ.onset_beats),
                            "metrics": None
                            if m is None
                            else {
                                "rate_hz": m.rate_hz,
                                "depth_cents": m.depth_cents,
                                "voiced_fraction": m.voiced_fraction,
                            },
                        }
                        for occ, m in vib
                    ],
                }
                emit(f"{stem}.vibrato.json", _dump_json(vib_record))
            except PipelineError:
                raise
            except (SorimirError, ValueError) as exc:
                raise PipelineError("contours", "*", exc) from exc

        for name in sorted(outputs):
            target = staging / name
            with open(target, "w", newline="\n") as fh:
                fh.write(outputs[name])
        for name in sorted(outputs):
            (staging / name).replace(out_root / name)
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    shutil.rmtree(staging, ignore_errors=True)

    return AnalysisBundle(
        daemok_ids=tuple(e["id"] for e in entries),
        histograms=histograms,
        pattern_index=index,
        contour_sets=contour_sets,
        provenance=provenance,
        output_files=tuple(str(out_root / name) for name in sorted(outputs)),
    )


def pattern_index_record(index: PatternIndex) -> dict:
    """JSON-ready dump of a mined pattern index."""
    return {
        "n_values": list(index.n_values),
        "min_support": index.min_support,
        "patterns": [
            {
                "tokens": list(p.tokens),
                "span_beats": fraction_str(p.span_beats),
                "support": index.support(p),
                "per_daemok": index.per_daemok_support(p),
                "occurrences": [
                    {
                        "daemok": o.daemok_id,
                        "start_event_index": o.start_event_index,
                        "onset_beats": fraction_str(o.onset_beats),
                        "span_beats": fraction_str(o.span_beats),
                    }
                    for o in index.occurrences[p]
                ],
            }
            for p in index.patterns
        ],
    }
