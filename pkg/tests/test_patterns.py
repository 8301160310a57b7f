import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sorimir.beat_grid import BeatAnnotation, BeatGrid, JangdanSpec
from sorimir.errors import ConfigurationError, DependencyError, NotEnoughDataError
from sorimir.patterns import (
    NGramPattern,
    detokenize,
    find_post_rest_long_notes,
    make_token,
    mine_ngrams,
    occurrence_contours,
    occurrence_vibrato,
    onset_glide,
    parse_token,
    tokenize,
    vibrato_metrics,
)
from sorimir.pitch_track import F0Track
from sorimir.score import NoteEvent, Pitch, note_sequence

HOP = 0.01


def ev(pitch, onset, duration, measure=0):
    return NoteEvent(Fraction(onset), Fraction(duration), pitch, measure)


def beats_grid(times, bpm=None):
    bpm = bpm or len(times)
    return BeatGrid(
        spec=JangdanSpec("test", bpm),
        annotations=tuple(BeatAnnotation(0, i, t) for i, t in enumerate(times)),
    )


class TestTokens:
    def test_tokenize_examples(self):
        assert tokenize([ev(Pitch("A", 0, 4), 0, Fraction(3, 2))]) == ["A4:3/2"]
        events = [
            ev(Pitch("D", 0, 5), 0, 1),
            ev(None, 1, 1),
            ev(Pitch("D", 0, 5), 2, 2),
        ]
        assert tokenize(events) == ["D5:1/1", "R:1/1", "D5:2/1"]

    def test_parse_token(self):
        pitch, dur = parse_token("F#4:3/2")
        assert pitch.midi == 66
        assert dur == Fraction(3, 2)
        assert parse_token("R:1/1") == (None, Fraction(1))

    def test_parse_rejects_non_canonical(self):
        for bad in ("A4:2/4", "A4:2", "A4", ":1/1", "A4:0/1", "a4:1/1"):
            with pytest.raises(ValueError):
                parse_token(bad)

    @given(
        st.lists(
            st.tuples(
                st.one_of(st.none(), st.integers(36, 96)),
                st.fractions(min_value=Fraction(1, 8), max_value=Fraction(8)),
            ),
            min_size=0,
            max_size=30,
        )
    )
    @settings(max_examples=100)
    def test_round_trip(self, rows):
        from sorimir.score import pitch_from_midi

        events = []
        onset = Fraction(0)
        for midi, dur in rows:
            pitch = None if midi is None else pitch_from_midi(midi)
            events.append(NoteEvent(onset, dur, pitch, 0))
            onset += dur
        back = detokenize(tokenize(events))
        assert len(back) == len(events)
        for (pitch, dur), original in zip(back, events):
            assert dur == original.duration_beats
            if original.pitch is None:
                assert pitch is None
            else:
                assert pitch == original.pitch  # spelling preserved


A = "A4:1/1"
B = "B4:1/1"


class TestMineNgrams:
    def test_hand_countable(self):
        index = mine_ngrams({"d": [A, B, A, B]}, n_values=(2,), min_support=1)
        assert index.support(NGramPattern((A, B))) == 2
        assert index.support(NGramPattern((B, A))) == 1

    def test_min_support_across_daemok(self):
        seqs = {"d1": [A, B, A, B], "d2": [A, B, A, B]}
        index = mine_ngrams(seqs, n_values=(2,), min_support=3)
        assert index.support(NGramPattern((A, B))) == 4
        assert NGramPattern((B, A)) not in index.occurrences

    def test_occurrence_onsets(self):
        index = mine_ngrams({"d": [A, B, A, B]}, n_values=(2,), min_support=1)
        occs = index.occurrences[NGramPattern((A, B))]
        assert [o.onset_beats for o in occs] == [Fraction(0), Fraction(2)]
        assert [o.start_event_index for o in occs] == [0, 2]
        assert all(o.span_beats == Fraction(2) for o in occs)

    def test_sorted_by_support_then_text(self):
        index = mine_ngrams({"d": [A, B, A, B, B]}, n_values=(2,), min_support=1)
        supports = [index.support(p) for p in index.patterns]
        assert supports == sorted(supports, reverse=True)
        texts = [p.text for p in index.patterns if index.support(p) == 1]
        assert texts == sorted(texts)

    def test_order_independence(self):
        seqs = {"x": [A, B, A], "y": [B, A, B], "z": [A, A, B]}
        index1 = mine_ngrams(seqs, n_values=(2, 3), min_support=1)
        index2 = mine_ngrams(dict(reversed(list(seqs.items()))), n_values=(2, 3), min_support=1)
        assert index1.patterns == index2.patterns
        assert index1.occurrences == index2.occurrences

    def test_random_against_naive_recount(self):
        rng = random.Random(1234)
        alphabet = [A, B, "C5:1/2", "R:1/1", "D5:3/2", "E5:2/1"]
        seqs = {
            f"seq{k:02d}": [rng.choice(alphabet) for _ in range(rng.randint(5, 120))]
            for k in range(20)
        }
        n_values = (2, 3, 4, 6)
        index = mine_ngrams(seqs, n_values=n_values, min_support=1)

        naive: dict[tuple[str, ...], int] = {}
        for tokens in seqs.values():
            for n in n_values:
                for i in range(len(tokens) - n + 1):
                    key = tuple(tokens[i : i + n])
                    naive[key] = naive.get(key, 0) + 1
        assert len(index.patterns) == len(naive)
        for pattern in index.patterns:
            assert index.support(pattern) == naive[pattern.tokens]

    def test_support_count_identity(self):
        rng = random.Random(7)
        alphabet = [A, B, "C5:1/2"]
        seqs = {
            f"s{k}": [rng.choice(alphabet) for _ in range(rng.randint(1, 40))] for k in range(8)
        }
        for n in (2, 3, 4, 6):
            index = mine_ngrams(seqs, n_values=(n,), min_support=1)
            total = sum(index.support(p) for p in index.patterns)
            assert total == sum(max(0, len(s) - n + 1) for s in seqs.values())

    def test_n_larger_than_all_sequences_warns(self):
        with pytest.warns(UserWarning, match="long enough"):
            index = mine_ngrams({"d": [A, B]}, n_values=(6,), min_support=1)
        assert len(index) == 0

    def test_preconditions(self):
        with pytest.raises(ConfigurationError):
            mine_ngrams({"d": [A, B]}, n_values=())
        with pytest.raises(ConfigurationError):
            mine_ngrams({"d": [A, B]}, n_values=(2,), min_support=0)
        with pytest.raises(ConfigurationError):
            mine_ngrams({"d": [A, B]}, n_values=(1,))

    def test_per_daemok_support(self):
        seqs = {"d1": [A, B, A, B], "d2": [A, B]}
        index = mine_ngrams(seqs, n_values=(2,), min_support=1)
        assert index.per_daemok_support(NGramPattern((A, B))) == {"d1": 2, "d2": 1}


def single_occurrence_setup(f0_values, conf=0.9, beat_times=(0.0, 0.5, 1.0)):
    """One daemok, one 2-token pattern spanning the full grid."""
    half = Fraction(1, 2) * (len(beat_times) - 1)
    token = make_token(Pitch("A", 0, 4), half)
    index = mine_ngrams({"d": [token, token]}, n_values=(2,), min_support=1)
    pattern = NGramPattern((token, token))
    f0 = np.asarray(f0_values, dtype=float)
    track = F0Track(f0, np.where(f0 > 0, conf, 0.0), HOP)
    return index, pattern, {"d": beats_grid(beat_times)}, {"d": track}


class TestOccurrenceContours:
    def test_pure_tone_is_flat_zero(self):
        index, pattern, grids, tracks = single_occurrence_setup([440.0] * 100)
        (contour,) = occurrence_contours(index, pattern, grids, tracks, samples_per_contour=200)
        assert contour.values.shape == (200,)
        assert np.all(np.isfinite(contour.values))
        assert np.abs(contour.values).max() < 1e-6

    def test_linear_cents_ramp_resamples_linearly(self):
        t = np.arange(100) * HOP
        f0 = 440.0 * 2 ** ((100.0 * t) / 1200.0)  # 0 -> 100 cents over 1 s
        index, pattern, grids, tracks = single_occurrence_setup(f0)
        (contour,) = occurrence_contours(index, pattern, grids, tracks, samples_per_contour=50)
        # Sampled beat range covers t in [0, 0.99]; expected cents are linear.
        expected = np.linspace(0.0, 99.0, 50)
        assert np.abs(contour.values - expected).max() < 1.0

    def test_fully_unvoiced_slice_kept_and_flagged(self):
        index, pattern, grids, tracks = single_occurrence_setup([0.0] * 100)
        (contour,) = occurrence_contours(index, pattern, grids, tracks)
        assert contour.is_all_missing

    def test_gap_not_interpolated_across(self):
        f0 = [440.0] * 40 + [0.0] * 20 + [440.0] * 40
        index, pattern, grids, tracks = single_occurrence_setup(f0)
        (contour,) = occurrence_contours(index, pattern, grids, tracks, samples_per_contour=100)
        assert np.isnan(contour.values[45:55]).all()
        assert np.isfinite(contour.values[:35]).all()

    def test_missing_grid_is_dependency_error(self):
        index, pattern, _, tracks = single_occurrence_setup([440.0] * 100)
        with pytest.raises(DependencyError, match="beat grid"):
            occurrence_contours(index, pattern, {}, tracks)

    def test_missing_track_is_dependency_error(self):
        index, pattern, grids, _ = single_occurrence_setup([440.0] * 100)
        with pytest.raises(DependencyError, match="F0 track"):
            occurrence_contours(index, pattern, grids, {})

    def test_pattern_not_in_index(self):
        index, _, grids, tracks = single_occurrence_setup([440.0] * 100)
        with pytest.raises(ConfigurationError, match="not in the index"):
            occurrence_contours(index, NGramPattern((A, B)), grids, tracks)

    def test_occurrence_past_grid_is_skipped_with_warning(self):
        token = make_token(Pitch("A", 0, 4), Fraction(2))
        index = mine_ngrams({"d": [token, token]}, n_values=(2,), min_support=1)
        pattern = NGramPattern((token, token))
        grids = {"d": beats_grid((0.0, 0.5, 1.0))}  # only 2 beats of span
        tracks = {"d": F0Track(np.full(100, 440.0), np.full(100, 0.9), HOP)}
        with pytest.warns(UserWarning, match="past the annotated grid"):
            contours = occurrence_contours(index, pattern, grids, tracks)
        assert contours == []

    def test_transposition_leaves_shape(self):
        index, pattern, grids, tracks = single_occurrence_setup([440.0] * 100)
        (c1,) = occurrence_contours(index, pattern, grids, tracks, reference_hz=440.0)
        (c2,) = occurrence_contours(index, pattern, grids, tracks, reference_hz=220.0)
        assert np.allclose(c2.values - c1.values, 1200.0, atol=1e-9)


class TestVibrato:
    def test_synthetic_6hz_50cents(self):
        t = np.arange(0, 2.0, HOP)
        cents = 1200.0 * np.log2(440.0 * 2 ** ((50 / 1200) * np.sin(2 * np.pi * 6 * t)) / 440.0)
        m = vibrato_metrics(cents, HOP)
        assert m.rate_hz == pytest.approx(6.0, abs=0.3)
        assert m.depth_cents == pytest.approx(50.0, abs=5.0)
        assert m.voiced_fraction == 1.0

    def test_constant_pitch(self):
        m = vibrato_metrics(np.full(60, 700.0), HOP)
        assert m.rate_hz == 0.0
        assert m.depth_cents == 0.0

    def test_doubling_depth(self):
        t = np.arange(0, 2.0, HOP)
        base = vibrato_metrics(25.0 * np.sin(2 * np.pi * 6 * t), HOP)
        doubled = vibrato_metrics(50.0 * np.sin(2 * np.pi * 6 * t), HOP)
        assert doubled.depth_cents == pytest.approx(2 * base.depth_cents, rel=0.10)
        assert doubled.rate_hz == pytest.approx(base.rate_hz, abs=0.3)

    def test_transposition_invariance(self):
        t = np.arange(0, 2.0, HOP)
        cents = 40.0 * np.sin(2 * np.pi * 5 * t)
        m1 = vibrato_metrics(cents, HOP)
        m2 = vibrato_metrics(cents + 700.0, HOP)
        assert m2.rate_hz == pytest.approx(m1.rate_hz, abs=1e-6)
        assert m2.depth_cents == pytest.approx(m1.depth_cents, abs=1e-6)

    def test_not_enough_data(self):
        with pytest.raises(NotEnoughDataError):
            vibrato_metrics(np.full(20, 0.0), HOP)  # 0.2 s < 0.3 s
        with pytest.raises(NotEnoughDataError):
            vibrato_metrics(np.full(100, np.nan), HOP)

    def test_voiced_fraction(self):
        cents = np.full(100, 10.0)
        cents[::3] = np.nan
        m = vibrato_metrics(cents, HOP)
        assert m.voiced_fraction == pytest.approx(66 / 100)


class TestOnsetGlide:
    def test_ascending_ramp(self):
        t = np.arange(0, 0.5, HOP)
        cents = (100.0 / 0.3) * t
        assert onset_glide(cents, HOP) == pytest.approx(100.0, abs=5.0)

    def test_flat(self):
        assert onset_glide(np.full(50, 42.0), HOP) == pytest.approx(0.0, abs=1.0)

    def test_descending_ramp(self):
        t = np.arange(0, 0.5, HOP)
        cents = (-50.0 / 0.3) * t
        assert onset_glide(cents, HOP) == pytest.approx(-50.0, abs=5.0)

    def test_starts_at_first_voiced_frame(self):
        t = np.arange(0, 0.8, HOP)
        cents = (100.0 / 0.3) * (t - 0.2)
        cents[t < 0.2] = np.nan  # silent lead-in
        assert onset_glide(cents, HOP) == pytest.approx(100.0, abs=5.0)

    def test_not_enough_voiced_data(self):
        cents = np.full(40, np.nan)
        cents[:10] = 5.0  # 0.1 s voiced
        with pytest.raises(NotEnoughDataError):
            onset_glide(cents, HOP)
        with pytest.raises(NotEnoughDataError):
            onset_glide(np.full(10, np.nan), HOP)


class TestPostRestLongNotes:
    def test_after_rest(self):
        events = [ev(None, 0, 1), ev(Pitch("A", 0, 4), 1, 3)]
        assert find_post_rest_long_notes(events, Fraction(2)) == [1]

    def test_no_rest_before(self):
        events = [ev(Pitch("A", 0, 4), 0, 1), ev(Pitch("A", 0, 4), 1, 3)]
        assert find_post_rest_long_notes(events, Fraction(2)) == []

    def test_piece_start_counts(self):
        events = [ev(Pitch("A", 0, 4), 0, 3)]
        assert find_post_rest_long_notes(events, Fraction(2)) == [0]

    def test_fixture_hand_scan(self, sample_score):
        events = note_sequence(sample_score)
        # Hand scan of the merged fixture events: index 0 opens the piece
        # (D5, 3 beats); index 4 (G5, 3/2) follows the only rest.
        assert find_post_rest_long_notes(events, Fraction(1)) == [0, 4]
        assert find_post_rest_long_notes(events, Fraction(2)) == [0]


class TestOccurrenceVibrato:
    def test_constant_tone_occurrence(self):
        index, pattern, grids, tracks = single_occurrence_setup([440.0] * 100)
        results = occurrence_vibrato(index, pattern, grids, tracks)
        assert len(results) == 1
        _, metrics = results[0]
        assert metrics is not None
        assert metrics.rate_hz == pytest.approx(0.0, abs=0.3)

    def test_unvoiced_occurrence_reports_none(self):
        index, pattern, grids, tracks = single_occurrence_setup([0.0] * 100)
        (result,) = occurrence_vibrato(index, pattern, grids, tracks)
        assert result[1] is None
