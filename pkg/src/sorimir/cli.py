"""Command-line interface.

Subcommands mirror the analysis stages: score, f0, beats, histogram,
patterns, run. Success prints the requested artifact (or writes --out) and
exits 0; any failure prints a one-line JSON error object to stderr and
exits nonzero.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import report
from .beat_grid import JangdanSpec, load_beats
from .errors import SorimirError
from .histogram import (
    BIN_MIDI,
    BIN_PITCH_CLASS,
    MODE_FACTORIES,
    f0_histogram,
    mode_affinity,
    score_duration_histogram,
)
from .patterns import (
    DEFAULT_MIN_SUPPORT,
    DEFAULT_N_VALUES,
    DEFAULT_SAMPLES_PER_CONTOUR,
    NGramPattern,
    mine_ngrams,
    occurrence_contours,
    occurrence_vibrato,
    tokenize,
)
from .pitch_track import (
    DEFAULT_FRAME_S,
    DEFAULT_HOP_S,
    DEFAULT_SEARCH_MAX_HZ,
    DEFAULT_SEARCH_MIN_HZ,
    DEFAULT_YIN_THRESHOLD,
    FilterConfig,
    estimate_f0_yin,
    export_f0_csv,
    filter_track,
    import_f0_csv,
    load_wav,
)
from .score import event_records, fraction_str, note_sequence, parse_musicxml
from .report import pattern_index_record


def _write_or_print(text: str, out_path: str | None):
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w", newline="\n") as fh:
            fh.write(text)


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _filter_args(parser: argparse.ArgumentParser):
    parser.add_argument("--min-conf", type=float, default=0.6,
                        help="confidence gate; frames below are dropped (default 0.6)")
    parser.add_argument("--min-hz", type=float, default=350.0,
                        help="register gate; 350 Hz and 1000 Hz themselves are kept (default 350)")
    parser.add_argument("--max-hz", type=float, default=1000.0, help="upper register gate (default 1000)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sorimir",
        description="Audio/transcription alignment and melodic-pattern analysis for solo vocal music.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # score
    p_score = sub.add_parser("score", help="MusicXML score operations")
    score_sub = p_score.add_subparsers(dest="score_command", required=True)
    p_dump = score_sub.add_parser("dump", help="dump the note-event table as JSON")
    p_dump.add_argument("--in", dest="infile", required=True)
    p_dump.add_argument("--no-merge-ties", action="store_true")
    p_dump.add_argument("--out")

    # f0
    p_f0 = sub.add_parser("f0", help="F0 track operations")
    f0_sub = p_f0.add_subparsers(dest="f0_command", required=True)
    p_ext = f0_sub.add_parser("extract", help="estimate F0 from a WAV file (YIN)")
    p_ext.add_argument("--in", dest="infile", required=True)
    p_ext.add_argument("--hop", type=float, default=DEFAULT_HOP_S)
    p_ext.add_argument("--frame", type=float, default=DEFAULT_FRAME_S)
    p_ext.add_argument("--search-min-hz", type=float, default=DEFAULT_SEARCH_MIN_HZ)
    p_ext.add_argument("--search-max-hz", type=float, default=DEFAULT_SEARCH_MAX_HZ)
    p_ext.add_argument("--threshold", type=float, default=DEFAULT_YIN_THRESHOLD)
    p_ext.add_argument("--out")
    p_imp = f0_sub.add_parser("import", help="validate and canonicalize an F0 CSV")
    p_imp.add_argument("--in", dest="infile", required=True)
    p_imp.add_argument("--out")
    p_fil = f0_sub.add_parser("filter", help="apply confidence and register gates")
    p_fil.add_argument("--in", dest="infile", required=True)
    _filter_args(p_fil)
    p_fil.add_argument("--out")

    # beats
    p_beats = sub.add_parser("beats", help="beat annotation operations")
    beats_sub = p_beats.add_subparsers(dest="beats_command", required=True)
    p_val = beats_sub.add_parser("validate", help="check a beats CSV against the jangdan spec")
    p_val.add_argument("--in", dest="infile", required=True)
    p_val.add_argument("--beats-per-measure", type=int, default=12)
    p_val.add_argument("--jangdan", default="joongmori")

    # histogram
    p_hist = sub.add_parser("histogram", help="paired F0/score pitch histograms")
    p_hist.add_argument("--score", required=True)
    p_hist.add_argument("--f0", required=True, help="F0 CSV (time,frequency,confidence)")
    p_hist.add_argument("--mode", action="append", choices=sorted(MODE_FACTORIES),
                        help="mode template(s) to score; repeatable")
    p_hist.add_argument("--bin-kind", choices=(BIN_MIDI, BIN_PITCH_CLASS), default=BIN_MIDI)
    p_hist.add_argument("--reference-hz", type=float, default=440.0)
    p_hist.add_argument("--tuning-offset-cents", type=float, default=0.0)
    p_hist.add_argument("--no-filter", action="store_true", help="histogram the track as-is")
    _filter_args(p_hist)
    p_hist.add_argument("--out", help="write the JSON report here")
    p_hist.add_argument("--svg", help="also write a paired bar chart here")
    p_hist.add_argument("--format", choices=("json", "svg"), default="json",
                        help="what to print when --out/--svg are not given")

    # patterns
    p_pat = sub.add_parser("patterns", help="n-gram mining and per-pattern analysis")
    pat_sub = p_pat.add_subparsers(dest="patterns_command", required=True)
    p_mine = pat_sub.add_parser("mine", help="mine n-grams across a directory of scores")
    p_mine.add_argument("--scores", required=True, help="directory of .musicxml/.xml files")
    p_mine.add_argument("--n", default=",".join(str(n) for n in DEFAULT_N_VALUES),
                        help="comma-separated n-gram lengths (default 2,3,4,6)")
    p_mine.add_argument("--min-support", type=int, default=DEFAULT_MIN_SUPPORT)
    p_mine.add_argument("--skip-rests", action="store_true")
    p_mine.add_argument("--out")
    for name, help_text in (
        ("contours", "beat-aligned F0 contours of one pattern"),
        ("vibrato", "vibrato metrics of one pattern's occurrences"),
    ):
        p_c = pat_sub.add_parser(name, help=help_text)
        p_c.add_argument("--manifest", required=True, help="pipeline manifest with per-daemok inputs")
        p_c.add_argument("--pattern", required=True, help='token text, e.g. "G4:1/2 A4:1/2 C5:1/1"')
        p_c.add_argument("--min-support", type=int, default=1)
        p_c.add_argument("--out")
        if name == "contours":
            p_c.add_argument("--samples", type=int, default=DEFAULT_SAMPLES_PER_CONTOUR)
            p_c.add_argument("--svg")
            p_c.add_argument("--format", choices=("csv", "svg"), default="csv")

    # run
    p_run = sub.add_parser("run", help="run the full pipeline from a manifest")
    p_run.add_argument("--manifest", required=True)
    p_run.add_argument("--out-dir")

    return parser


def _cmd_score(args) -> int:
    score = parse_musicxml(Path(args.infile).read_bytes())
    events = note_sequence(score, merge_ties=not args.no_merge_ties)
    record = {
        "daemok_id": score.daemok_id,
        "time_signature": str(score.time_signature),
        "divisions": score.divisions,
        "merge_ties": not args.no_merge_ties,
        "events": event_records(events),
    }
    _write_or_print(_dump_json(record), args.out)
    return 0


def _cmd_f0(args) -> int:
    if args.f0_command == "extract":
        samples, sample_rate = load_wav(args.infile)
        track = estimate_f0_yin(
            samples,
            sample_rate,
            frame_s=args.frame,
            hop_s=args.hop,
            search_min_hz=args.search_min_hz,
            search_max_hz=args.search_max_hz,
            threshold=args.threshold,
        )
    elif args.f0_command == "import":
        track = import_f0_csv(Path(args.infile).read_text())
    else:
        track = import_f0_csv(Path(args.infile).read_text())
        track = filter_track(track, FilterConfig(args.min_conf, args.min_hz, args.max_hz))
    _write_or_print(export_f0_csv(track), args.out)
    return 0


def _cmd_beats(args) -> int:
    grid = load_beats(
        Path(args.infile).read_text(),
        JangdanSpec(args.jangdan, args.beats_per_measure),
    )
    _write_or_print(
        _dump_json(
            {
                "ok": True,
                "jangdan": grid.spec.name,
                "beats_per_measure": grid.spec.beats_per_measure,
                "measures": grid.n_measures,
                "beats": grid.n_beats,
                "first_time_s": grid.times[0] if grid.n_beats else None,
                "last_time_s": grid.times[-1] if grid.n_beats else None,
            }
        ),
        None,
    )
    return 0


def _cmd_histogram(args) -> int:
    score = parse_musicxml(Path(args.score).read_bytes())
    events = note_sequence(score, merge_ties=True)
    track = import_f0_csv(Path(args.f0).read_text())
    if not args.no_filter:
        track = filter_track(track, FilterConfig(args.min_conf, args.min_hz, args.max_hz))
    reference = args.reference_hz * 2.0 ** (args.tuning_offset_cents / 1200.0)

    f0_hist = f0_histogram(track, reference_hz=reference, bin_kind=args.bin_kind)
    score_hist = score_duration_histogram(events, bin_kind=args.bin_kind)
    affinities = {}
    for mode_name in args.mode or []:
        template = MODE_FACTORIES[mode_name]()
        affinities[mode_name] = {
            "f0": mode_affinity(f0_hist, template) if f0_hist.total_mass else None,
            "score": mode_affinity(score_hist, template) if score_hist.total_mass else None,
        }
    record = {
        "daemok": score.daemok_id,
        "reference_hz": reference,
        "f0_histogram": f0_hist.to_record(),
        "score_histogram": score_hist.to_record(),
        "affinities": affinities,
    }
    svg_text = report.render_histogram_figure(f0_hist, score_hist)
    wrote = False
    if args.out:
        _write_or_print(_dump_json(record), args.out)
        wrote = True
    if args.svg:
        _write_or_print(svg_text, args.svg)
        wrote = True
    if not wrote:
        sys.stdout.write(svg_text if args.format == "svg" else _dump_json(record))
    return 0


def _collect_score_sequences(directory: str, skip_rests: bool) -> dict[str, list[str]]:
    root = Path(directory)
    files = sorted(p for p in root.iterdir() if p.suffix.lower() in (".musicxml", ".xml"))
    if not files:
        raise SorimirError(f"no .musicxml/.xml files in {directory}")
    sequences = {}
    for path in files:
        score = parse_musicxml(path.read_bytes())
        events = note_sequence(score, merge_ties=True)
        if skip_rests:
            events = [e for e in events if not e.is_rest]
        sequences[path.stem] = tokenize(events)
    return sequences


def _pattern_inputs(manifest_path: str, min_support: int):
    entries, settings = report.load_manifest(manifest_path)
    events_by_id, grids, tracks = {}, {}, {}
    for entry in entries:
        _, events, grid, track = report._load_daemok(entry, settings)
        events_by_id[entry["id"]] = events
        grids[entry["id"]] = grid
        tracks[entry["id"]] = track
    sequences = {
        daemok_id: tokenize([e for e in evs if not (settings["skip_rests"] and e.is_rest)])
        for daemok_id, evs in events_by_id.items()
    }
    index = mine_ngrams(sequences, n_values=tuple(settings["n_values"]), min_support=min_support)
    reference = report._effective_reference(settings)
    return index, grids, tracks, settings, reference


def _cmd_patterns(args) -> int:
    if args.patterns_command == "mine":
        n_values = tuple(int(v) for v in str(args.n).split(",") if v.strip())
        sequences = _collect_score_sequences(args.scores, args.skip_rests)
        index = mine_ngrams(sequences, n_values=n_values, min_support=args.min_support)
        _write_or_print(_dump_json(pattern_index_record(index)), args.out)
        return 0

    index, grids, tracks, settings, reference = _pattern_inputs(args.manifest, args.min_support)
    pattern = NGramPattern.from_text(args.pattern)

    if args.patterns_command == "contours":
        contours = occurrence_contours(
            index, pattern, grids, tracks,
            samples_per_contour=args.samples, reference_hz=reference,
        )
        csv_text = report.contours_csv(pattern, contours)
        svg_text = report.render_contour_overlay(contours)
        wrote = False
        if args.out:
            _write_or_print(csv_text, args.out)
            wrote = True
        if args.svg:
            _write_or_print(svg_text, args.svg)
            wrote = True
        if not wrote:
            sys.stdout.write(svg_text if args.format == "svg" else csv_text)
        return 0

    vib = occurrence_vibrato(index, pattern, grids, tracks, reference_hz=reference)
    record = {
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
    _write_or_print(_dump_json(record), args.out)
    return 0


def _cmd_run(args) -> int:
    bundle = report.run_pipeline(args.manifest, out_dir=args.out_dir)
    _write_or_print(
        _dump_json(
            {
                "ok": True,
                "daemok": list(bundle.daemok_ids),
                "patterns": len(bundle.pattern_index),
                "contour_sets": {k: len(v) for k, v in bundle.contour_sets.items()},
                "outputs": [str(p) for p in bundle.output_files],
            }
        ),
        None,
    )
    return 0


_COMMANDS = {
    "score": _cmd_score,
    "f0": _cmd_f0,
    "beats": _cmd_beats,
    "histogram": _cmd_histogram,
    "patterns": _cmd_patterns,
    "run": _cmd_run,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (SorimirError, OSError, ValueError) as exc:
        sys.stderr.write(
            json.dumps({"error": {"type": type(exc).__name__, "message": str(exc)}}) + "\n"
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
