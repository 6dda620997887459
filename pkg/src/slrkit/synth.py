"""Synthetic keypoint-sequence generator for desk-scale experiments.

Each class gets a prototype trajectory: a smooth sum of up to three
sinusoids per coordinate for each hand, oscillating around the anchor
point of the concept the class belongs to.  Samples are the prototype
plus per-landmark Gaussian jitter.  Two specs sharing concept_anchors
(but different seeds and class lists) act as an iconic source/target
dataset pair: their classes differ, yet signs for the same concept
occupy the same region of the frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kpseq import (
    FRAME_WIDTH,
    HAND_POINTS,
    LEFT_HAND_START,
    RIGHT_HAND_START,
    KeypointSequence,
    quantize32,
)
from .manifest import Manifest, SampleRecord, write_manifest

# Anchor per iconic concept: where in the frame signs of that concept live
# (x left-right, y top-down; all in the raised-hands band y < 0.6).
DEFAULT_ANCHORS: dict[str, tuple[float, float]] = {
    "anatomy": (0.30, 0.35),
    "hair": (0.52, 0.10),
    "eyesight": (0.40, 0.18),
    "love": (0.50, 0.48),
    "sound": (0.68, 0.16),
    "food": (0.50, 0.28),
    "clothes": (0.35, 0.55),
    "say": (0.58, 0.30),
    "hear": (0.72, 0.28),
}

SHOULDERS = ((0.35, 0.30), (0.65, 0.30))
Z_DEPTH = 0.05
HAND_SCALE = 0.035
AMPLITUDE_BUDGET = 0.06  # per coordinate, keeps class mass near its anchor


@dataclass
class SynthSpec:
    num_classes: int
    samples_per_class: int
    frames_range: tuple[int, int]
    concept_anchors: dict[str, tuple[float, float]]
    class_to_concept: dict[str, str]
    jitter_stddev: float
    seed: int
    dataset_id: str = "synth"
    fps: float = 25.0

    def validate(self) -> None:
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.samples_per_class < 2:
            raise ValueError(
                f"samples_per_class must be >= 2, got {self.samples_per_class}"
            )
        if self.jitter_stddev < 0:
            raise ValueError(f"jitter_stddev must be >= 0, got {self.jitter_stddev}")
        lo, hi = self.frames_range
        if not (1 <= lo <= hi):
            raise ValueError(f"bad frames_range {self.frames_range}")
        if len(self.class_to_concept) != self.num_classes:
            raise ValueError(
                f"class_to_concept has {len(self.class_to_concept)} entries "
                f"for {self.num_classes} classes"
            )
        for label, concept in self.class_to_concept.items():
            if concept not in self.concept_anchors:
                raise ValueError(f"class {label!r} maps to unknown concept {concept!r}")
        for concept, (ax, ay) in self.concept_anchors.items():
            if not (0.0 <= ax <= 1.0 and 0.0 <= ay <= 1.0):
                raise ValueError(f"anchor for {concept!r} outside [0,1]^2: ({ax}, {ay})")


def default_spec(
    num_classes: int,
    samples_per_class: int,
    frames_range: tuple[int, int] = (10, 20),
    concepts: list[str] | None = None,
    jitter_stddev: float = 0.01,
    seed: int = 0,
    dataset_id: str = "synth",
    anchors: dict[str, tuple[float, float]] | None = None,
) -> SynthSpec:
    """Build a SynthSpec with auto-named classes assigned round-robin to concepts."""
    if concepts is None:
        concepts = list(DEFAULT_ANCHORS)
    anchors = dict(anchors) if anchors is not None else dict(DEFAULT_ANCHORS)
    class_to_concept = {
        f"{concepts[i % len(concepts)]}_{i:02d}": concepts[i % len(concepts)]
        for i in range(num_classes)
    }
    spec = SynthSpec(
        num_classes=num_classes,
        samples_per_class=samples_per_class,
        frames_range=frames_range,
        concept_anchors={c: anchors[c] for c in set(concepts)},
        class_to_concept=class_to_concept,
        jitter_stddev=jitter_stddev,
        seed=seed,
        dataset_id=dataset_id,
    )
    spec.validate()
    return spec


def _hand_template() -> np.ndarray:
    """(21, 2) landmark offsets in a unit box: wrist at the base, fingers fanned up."""
    pts = [(0.0, 0.9)]
    for finger in range(5):
        x = -0.8 + 0.4 * finger
        for joint in range(4):
            pts.append((x * (0.6 + 0.1 * joint), 0.5 - 0.45 * joint))
    return np.array(pts, dtype=np.float64)


_TEMPLATE = _hand_template()


@dataclass
class _HandPath:
    """Sum-of-sinusoids trajectory around a fixed center."""

    center: np.ndarray  # (2,)
    amps: list[np.ndarray] = field(default_factory=list)  # per coordinate
    freqs: list[np.ndarray] = field(default_factory=list)
    phases: list[np.ndarray] = field(default_factory=list)

    def at(self, u: np.ndarray) -> np.ndarray:
        """Evaluate at parameter values u in [0, 1]; returns (len(u), 2)."""
        out = np.empty((u.shape[0], 2))
        for c in range(2):
            waves = self.amps[c][None, :] * np.sin(
                2.0 * math.pi * self.freqs[c][None, :] * u[:, None]
                + self.phases[c][None, :]
            )
            out[:, c] = self.center[c] + waves.sum(axis=1)
        return out


def _draw_path(rng: np.random.Generator, anchor: tuple[float, float]) -> _HandPath:
    path = _HandPath(center=np.asarray(anchor, dtype=np.float64))
    for _ in range(2):  # x then y
        k = int(rng.integers(1, 4))
        amps = rng.uniform(0.005, 0.03, k)
        total = amps.sum()
        if total > AMPLITUDE_BUDGET:
            amps *= AMPLITUDE_BUDGET / total
        path.amps.append(amps)
        path.freqs.append(rng.uniform(0.5, 2.0, k))
        path.phases.append(rng.uniform(0.0, 2.0 * math.pi, k))
    return path


def synth_generate(spec: SynthSpec) -> tuple[list[KeypointSequence], Manifest]:
    """Generate the dataset described by spec; deterministic for a fixed spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)

    prototypes: dict[str, tuple[_HandPath, _HandPath]] = {}
    for label in sorted(spec.class_to_concept):
        anchor = spec.concept_anchors[spec.class_to_concept[label]]
        prototypes[label] = (_draw_path(rng, anchor), _draw_path(rng, anchor))

    lo, hi = spec.frames_range
    sequences: list[KeypointSequence] = []
    rows: list[SampleRecord] = []
    for label in sorted(spec.class_to_concept):
        concept = spec.class_to_concept[label]
        left_path, right_path = prototypes[label]
        for k in range(spec.samples_per_class):
            num_frames = int(rng.integers(lo, hi + 1))
            u = np.linspace(0.0, 1.0, num_frames)
            left_center = left_path.at(u)
            right_center = right_path.at(u)

            xy = np.empty((num_frames, 46, 2))
            xy[:, 0, :] = SHOULDERS[0]
            xy[:, 1, :] = SHOULDERS[1]
            xy[:, 2, :] = left_center  # pose wrists track the hand centers
            xy[:, 3, :] = right_center
            xy[:, LEFT_HAND_START : LEFT_HAND_START + HAND_POINTS, :] = (
                left_center[:, None, :] + HAND_SCALE * _TEMPLATE[None, :, :]
            )
            mirrored = _TEMPLATE * np.array([-1.0, 1.0])
            xy[:, RIGHT_HAND_START : RIGHT_HAND_START + HAND_POINTS, :] = (
                right_center[:, None, :] + HAND_SCALE * mirrored[None, :, :]
            )
            if spec.jitter_stddev > 0:
                xy += rng.normal(0.0, spec.jitter_stddev, xy.shape)
            np.clip(xy, 0.0, 1.0, out=xy)

            frames = np.empty((num_frames, FRAME_WIDTH))
            frames[:, 0::3] = xy[:, :, 0]
            frames[:, 1::3] = xy[:, :, 1]
            frames[:, 2::3] = Z_DEPTH

            sample_id = f"{spec.dataset_id}_{label}_{k:03d}"
            sequences.append(
                KeypointSequence(
                    sample_id=sample_id,
                    dataset_id=spec.dataset_id,
                    label=label,
                    concept=concept,
                    fps=spec.fps,
                    frames=quantize32(frames),
                    presence=np.ones((num_frames, 2), dtype=bool),
                )
            )
            rows.append(
                SampleRecord(
                    path=f"{sample_id}.kpseq.json",
                    label=label,
                    concept=concept,
                    split="unassigned",
                )
            )
    return sequences, Manifest(rows)


def write_dataset(
    sequences: list[KeypointSequence],
    manifest: Manifest,
    directory: str | Path,
) -> Path:
    """Write every sequence plus manifest.csv under directory; returns the manifest path."""
    from .kpseq import write_kpseq

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    by_path = {row.path: row for row in manifest.rows}
    for seq in sequences:
        path = f"{seq.sample_id}.kpseq.json"
        if path not in by_path:
            raise ValueError(f"sequence {seq.sample_id} missing from manifest")
        write_kpseq(seq, directory / path)
    manifest_path = directory / "manifest.csv"
    write_manifest(manifest, manifest_path)
    return manifest_path
