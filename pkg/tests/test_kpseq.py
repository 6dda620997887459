from __future__ import annotations

import json

import numpy as np
import pytest

from slrkit.kpseq import (
    FRAME_WIDTH,
    KpseqError,
    filter_frames,
    parse_kpseq,
    quantize32,
    write_kpseq,
)
from slrkit.synth import default_spec, synth_generate

from conftest import make_sequence


class TestRoundTrip:
    def test_constant_half_frame(self, tmp_path):
        seq = make_sequence()
        path = tmp_path / "s.kpseq.json"
        write_kpseq(seq, path)
        back = parse_kpseq(path)
        assert back.sample_id == seq.sample_id
        assert back.label == seq.label
        assert back.concept is None
        assert back.fps == seq.fps
        np.testing.assert_array_equal(back.frames, quantize32(seq.frames))
        np.testing.assert_array_equal(back.presence, seq.presence)

    def test_round_trip_synthetic(self, tmp_path, tiny_dataset):
        sequences, _ = tiny_dataset
        for seq in sequences[:4]:
            path = tmp_path / f"{seq.sample_id}.kpseq.json"
            write_kpseq(seq, path)
            back = parse_kpseq(path)
            np.testing.assert_array_equal(back.frames, seq.frames)
            np.testing.assert_array_equal(back.presence, seq.presence)
            assert back.concept == seq.concept

    def test_write_is_deterministic(self, tmp_path):
        spec = default_spec(2, 2, frames_range=(30, 30), seed=7, jitter_stddev=0.02)
        seqs, _ = synth_generate(spec)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        write_kpseq(seqs[0], a)
        write_kpseq(seqs[0], b)
        assert a.read_bytes() == b.read_bytes()

    def test_zero_frames_refused(self, tmp_path):
        seq = make_sequence()
        seq.frames = np.empty((0, FRAME_WIDTH))
        seq.presence = np.empty((0, 2), dtype=bool)
        with pytest.raises(KpseqError):
            write_kpseq(seq, tmp_path / "bad.json")


class TestParseValidation:
    def _doc(self, seq) -> dict:
        return {
            "schema": "kpseq/1",
            "sample_id": seq.sample_id,
            "dataset_id": seq.dataset_id,
            "label": seq.label,
            "concept": seq.concept,
            "fps": seq.fps,
            "landmark_layout": "holistic46/1",
            "presence": [[bool(l), bool(r)] for l, r in seq.presence],
            "frames": [[float(v) for v in row] for row in seq.frames],
        }

    def test_wrong_schema_version(self, tmp_path):
        doc = self._doc(make_sequence())
        doc["schema"] = "kpseq/2"
        path = tmp_path / "v2.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(KpseqError, match="schema"):
            parse_kpseq(path)

    def test_wrong_layout(self, tmp_path):
        doc = self._doc(make_sequence())
        doc["landmark_layout"] = "holistic33/1"
        path = tmp_path / "layout.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(KpseqError, match="layout"):
            parse_kpseq(path)

    def test_frame_width_137(self, tmp_path):
        doc = self._doc(make_sequence())
        doc["frames"][0] = doc["frames"][0][:-1]
        path = tmp_path / "w.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(KpseqError, match="width"):
            parse_kpseq(path)

    def test_out_of_range_coordinate(self, tmp_path):
        doc = self._doc(make_sequence())
        doc["frames"][0][4 * 3] = 1.5  # x of a detected left-hand landmark
        path = tmp_path / "r.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(KpseqError, match=r"\[0, 1\]"):
            parse_kpseq(path)

    def test_undetected_hand_must_be_zero(self, tmp_path):
        seq = make_sequence()
        seq.presence[0, 0] = False  # left hand down but landmarks nonzero
        doc = self._doc(seq)
        path = tmp_path / "z.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(KpseqError, match="undetected"):
            parse_kpseq(path)

    def test_undetected_zero_filled_ok(self, tmp_path):
        seq = make_sequence()
        seq.frames[:, 4 * 3 : 25 * 3] = 0.0
        seq.presence[:, 0] = False
        path = tmp_path / "ok.json"
        write_kpseq(seq, path)
        back = parse_kpseq(path)
        assert not back.presence[0, 0] and back.presence[0, 1]

    def test_not_json(self, tmp_path):
        path = tmp_path / "garbage.json"
        path.write_text("not json {")
        with pytest.raises(KpseqError, match="JSON"):
            parse_kpseq(path)


class TestFilterFrames:
    def test_kept_when_one_wrist_raised(self):
        # left wrist at 0.55 (raised above the 0.6 line), right resting at 0.9
        seq = make_sequence(wrist_ys=[(0.55, 0.9)])
        assert filter_frames(seq, 0.6).num_frames == 1

    def test_dropped_when_both_wrists_low(self):
        seq = make_sequence(wrist_ys=[(0.70, 0.70), (0.55, 0.9)])
        out = filter_frames(seq, 0.6)
        assert out.num_frames == 1
        assert out.frames[0, 2 * 3 + 1] == pytest.approx(0.55)

    def test_threshold_one_keeps_in_range_data(self):
        seq = make_sequence(wrist_ys=[(0.2, 0.9), (0.7, 0.99), (0.5, 0.5)])
        out = filter_frames(seq, 1.0)
        assert out.num_frames == 3
        np.testing.assert_array_equal(out.frames, seq.frames)

    def test_empty_result_names_sample(self):
        seq = make_sequence(sample_id="resting", wrist_ys=[(0.8, 0.9), (0.95, 0.7)])
        with pytest.raises(KpseqError, match="resting"):
            filter_frames(seq, 0.6)

    def test_bad_threshold(self):
        seq = make_sequence(wrist_ys=[(0.5, 0.5)])
        with pytest.raises(ValueError):
            filter_frames(seq, 0.0)
        with pytest.raises(ValueError):
            filter_frames(seq, 1.5)

    def test_soundness_and_subsequence(self, tiny_dataset):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(2, 12))
            wrist_ys = [tuple(rng.uniform(0, 1, 2)) for _ in range(n)]
            seq = make_sequence(wrist_ys=wrist_ys)
            threshold = float(rng.uniform(0.05, 1.0))
            if not np.any(seq.wrist_y() < threshold):
                with pytest.raises(KpseqError):
                    filter_frames(seq, threshold)
                continue
            out = filter_frames(seq, threshold)
            assert np.all(out.wrist_y() < threshold)
            # output frames appear in the input, in order
            kept = seq.frames[seq.wrist_y() < threshold]
            np.testing.assert_array_equal(out.frames, kept)

    def test_idempotent(self):
        seq = make_sequence(wrist_ys=[(0.1, 0.9), (0.59, 0.61), (0.3, 0.3)])
        once = filter_frames(seq, 0.6)
        twice = filter_frames(once, 0.6)
        np.testing.assert_array_equal(once.frames, twice.frames)
        np.testing.assert_array_equal(once.presence, twice.presence)

    def test_presence_untouched(self):
        presence = np.array([[True, False], [False, True], [True, True]])
        seq = make_sequence(wrist_ys=[(0.1, 0.9), (0.2, 0.9), (0.9, 0.9)])
        seq.presence = presence
        seq.frames[0, 4 * 3 : 25 * 3] = 0.0  # keep undetected hands zeroed
        seq.frames[1, 4 * 3 : 25 * 3] = 0.0
        seq.frames[1, 25 * 3 :] = 0.0
        seq.frames[2, 25 * 3 :] = 0.0
        seq.presence = np.array([[False, True], [False, False], [True, False]])
        out = filter_frames(seq, 0.6)
        np.testing.assert_array_equal(out.presence, seq.presence[:2])
