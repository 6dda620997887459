from __future__ import annotations

import numpy as np
import pytest

from slrkit.kpseq import parse_kpseq, validate_sequence
from slrkit.synth import DEFAULT_ANCHORS, SynthSpec, default_spec, synth_generate, write_dataset


class TestSpecValidation:
    def test_too_few_classes(self):
        with pytest.raises(ValueError, match="num_classes"):
            default_spec(1, 5)

    def test_too_few_samples(self):
        with pytest.raises(ValueError, match="samples_per_class"):
            default_spec(3, 1)

    def test_negative_jitter(self):
        with pytest.raises(ValueError, match="jitter"):
            default_spec(3, 5, jitter_stddev=-0.1)

    def test_unknown_concept(self):
        spec = default_spec(2, 2)
        spec.class_to_concept = {"a": "anatomy", "b": "nonexistent"}
        with pytest.raises(ValueError, match="nonexistent"):
            spec.validate()

    def test_anchor_outside_unit_square(self):
        spec = default_spec(2, 2)
        spec.concept_anchors = dict(spec.concept_anchors, anatomy=(1.2, 0.5))
        spec.class_to_concept = {k: "anatomy" for k in spec.class_to_concept}
        with pytest.raises(ValueError, match="anchor"):
            spec.validate()


class TestGeneration:
    def test_manifest_row_count(self):
        _, manifest = synth_generate(default_spec(5, 20, seed=1))
        assert len(manifest) == 100

    def test_zero_jitter_collapses_within_class(self):
        spec = default_spec(2, 3, frames_range=(12, 12), jitter_stddev=0.0, seed=4)
        sequences, _ = synth_generate(spec)
        by_label: dict[str, list] = {}
        for seq in sequences:
            by_label.setdefault(seq.label, []).append(seq)
        for group in by_label.values():
            for other in group[1:]:
                np.testing.assert_array_equal(group[0].frames, other.frames)

    def test_deterministic_files(self, tmp_path):
        spec = default_spec(3, 3, seed=21, jitter_stddev=0.02)
        for name in ("one", "two"):
            seqs, manifest = synth_generate(spec)
            write_dataset(seqs, manifest, tmp_path / name)
        files_a = sorted((tmp_path / "one").iterdir())
        files_b = sorted((tmp_path / "two").iterdir())
        assert [f.name for f in files_a] == [f.name for f in files_b]
        for a, b in zip(files_a, files_b):
            assert a.read_bytes() == b.read_bytes()

    def test_every_sequence_is_valid(self, tiny_dataset):
        sequences, _ = tiny_dataset
        for seq in sequences:
            validate_sequence(seq)

    def test_generated_files_parse(self, tmp_path, tiny_dataset):
        sequences, manifest = tiny_dataset
        write_dataset(sequences, manifest, tmp_path)
        for row in manifest.rows:
            back = parse_kpseq(tmp_path / row.path)
            assert back.label == row.label
            assert back.concept == row.concept

    def test_hands_near_anchor(self):
        spec = default_spec(2, 4, concepts=["hair", "love"], jitter_stddev=0.01, seed=9)
        sequences, _ = synth_generate(spec)
        for seq in sequences:
            anchor = np.array(DEFAULT_ANCHORS[seq.concept])
            for landmark in (4, 25):  # the two hand wrists
                xy = seq.landmark_xy(landmark)
                assert np.max(np.linalg.norm(xy - anchor, axis=1)) < 0.15

    def test_frame_count_within_range(self, tiny_dataset):
        sequences, _ = tiny_dataset
        lengths = {seq.num_frames for seq in sequences}
        assert all(5 <= n <= 9 for n in lengths)
        assert len(lengths) > 1  # variable-length by construction

    def test_shared_anchor_pair_overlaps(self):
        # source/target specs sharing anchors put same-concept classes in
        # the same region: the iconic-pair construction
        source = default_spec(2, 2, concepts=["food", "sound"], seed=1, dataset_id="src")
        target = default_spec(2, 2, concepts=["food", "sound"], seed=2, dataset_id="tgt")
        src_seqs, _ = synth_generate(source)
        tgt_seqs, _ = synth_generate(target)
        src_food = next(s for s in src_seqs if s.concept == "food")
        tgt_food = next(s for s in tgt_seqs if s.concept == "food")
        anchor = np.array(DEFAULT_ANCHORS["food"])
        for seq in (src_food, tgt_food):
            center = seq.landmark_xy(4).mean(axis=0)
            assert np.linalg.norm(center - anchor) < 0.1
