from __future__ import annotations

import numpy as np
import pytest

from slrkit.kpseq import FRAME_WIDTH, KeypointSequence
from slrkit.synth import default_spec, synth_generate


def make_sequence(
    sample_id: str = "s0",
    label: str = "wave",
    frames: np.ndarray | None = None,
    presence: np.ndarray | None = None,
    wrist_ys: list[tuple[float, float]] | None = None,
    concept: str | None = None,
) -> KeypointSequence:
    """Hand-built valid sequence; wrist_ys sets the pose-wrist y pair per frame."""
    if frames is None:
        n = len(wrist_ys) if wrist_ys else 1
        frames = np.full((n, FRAME_WIDTH), 0.5)
        frames[:, 2::3] = 0.05
        if wrist_ys:
            for t, (left_y, right_y) in enumerate(wrist_ys):
                frames[t, 2 * 3 + 1] = left_y
                frames[t, 3 * 3 + 1] = right_y
    if presence is None:
        presence = np.ones((frames.shape[0], 2), dtype=bool)
    return KeypointSequence(
        sample_id=sample_id,
        dataset_id="testset",
        label=label,
        concept=concept,
        fps=25.0,
        frames=frames,
        presence=presence,
    )


@pytest.fixture(scope="session")
def tiny_dataset():
    """3 classes x 4 samples of easy synthetic data, variable lengths."""
    spec = default_spec(
        num_classes=3,
        samples_per_class=4,
        frames_range=(5, 9),
        concepts=["hair", "love", "hear"],
        jitter_stddev=0.01,
        seed=7,
        dataset_id="tiny",
    )
    return synth_generate(spec)
