"""Keypoint sequence data model and the KPSEQ on-disk format.

A sample is an ordered list of frames, each frame holding 46 landmarks
(x, y, z) in a fixed layout ("holistic46/1"):

    index 0      pose left shoulder
    index 1      pose right shoulder
    index 2      pose left wrist
    index 3      pose right wrist
    indices 4-24   left hand landmarks 0-20
    indices 25-45  right hand landmarks 0-20

x and y are normalised to the frame dimensions (0.0 to 1.0, y grows
downward so resting hands sit near y=1); z is depth on roughly the same
scale as x.  An undetected hand is zero-filled and flagged in the
per-frame presence pair [left_detected, right_detected].
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SCHEMA_ID = "kpseq/1"
LAYOUT_ID = "holistic46/1"

NUM_LANDMARKS = 46
FRAME_WIDTH = NUM_LANDMARKS * 3  # 138

POSE_LEFT_SHOULDER = 0
POSE_RIGHT_SHOULDER = 1
POSE_LEFT_WRIST = 2
POSE_RIGHT_WRIST = 3
LEFT_HAND_START = 4
RIGHT_HAND_START = 25
HAND_POINTS = 21


class KpseqError(ValueError):
    """Malformed or invariant-violating keypoint data."""


@dataclass
class KeypointSequence:
    """One sign sample: frames of 46 landmarks plus label and provenance.

    frames is a (T, 138) float array, presence a (T, 2) bool array
    ([left_hand_detected, right_hand_detected] per frame).
    """

    sample_id: str
    dataset_id: str
    label: str
    fps: float
    frames: np.ndarray
    presence: np.ndarray
    concept: str | None = None

    def __post_init__(self) -> None:
        self.frames = np.asarray(self.frames, dtype=np.float64)
        self.presence = np.asarray(self.presence, dtype=bool)
        if self.frames.ndim == 1:
            self.frames = self.frames.reshape(1, -1)
        if self.presence.ndim == 1:
            self.presence = self.presence.reshape(1, -1)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    def landmark_xy(self, landmark: int) -> np.ndarray:
        """(T, 2) array of x,y for one landmark index across all frames."""
        return self.frames[:, landmark * 3 : landmark * 3 + 2]

    def wrist_y(self) -> np.ndarray:
        """(T,) per-frame min of the two pose-wrist y coordinates."""
        left = self.frames[:, POSE_LEFT_WRIST * 3 + 1]
        right = self.frames[:, POSE_RIGHT_WRIST * 3 + 1]
        return np.minimum(left, right)


def validate_sequence(seq: KeypointSequence) -> None:
    """Check every KeypointSequence invariant; raise KpseqError on the first violation."""
    if not seq.sample_id:
        raise KpseqError("sample_id must be non-empty")
    if not seq.label:
        raise KpseqError(f"{seq.sample_id}: label must be non-empty")
    if not (math.isfinite(seq.fps) and seq.fps > 0):
        raise KpseqError(f"{seq.sample_id}: fps must be a positive real, got {seq.fps}")
    if seq.frames.ndim != 2 or seq.frames.shape[0] < 1:
        raise KpseqError(f"{seq.sample_id}: frames must be a non-empty (T, {FRAME_WIDTH}) array")
    if seq.frames.shape[1] != FRAME_WIDTH:
        raise KpseqError(
            f"{seq.sample_id}: frame width {seq.frames.shape[1]} != {FRAME_WIDTH}"
        )
    if seq.presence.shape != (seq.frames.shape[0], 2):
        raise KpseqError(
            f"{seq.sample_id}: presence shape {seq.presence.shape} does not match "
            f"{seq.frames.shape[0]} frames"
        )
    if not np.all(np.isfinite(seq.frames)):
        raise KpseqError(f"{seq.sample_id}: non-finite coordinate")

    for t in range(seq.frames.shape[0]):
        _validate_frame(seq.frames[t], seq.presence[t], f"{seq.sample_id} frame {t}")


def _validate_frame(coords: np.ndarray, presence: np.ndarray, where: str) -> None:
    pose = coords[: LEFT_HAND_START * 3].reshape(-1, 3)
    if np.any(pose[:, 0] < 0.0) or np.any(pose[:, 0] > 1.0) \
            or np.any(pose[:, 1] < 0.0) or np.any(pose[:, 1] > 1.0):
        raise KpseqError(f"{where}: pose x/y outside [0, 1]")
    for hand, start in (("left", LEFT_HAND_START), ("right", RIGHT_HAND_START)):
        block = coords[start * 3 : (start + HAND_POINTS) * 3]
        detected = bool(presence[0] if hand == "left" else presence[1])
        if detected:
            xy = block.reshape(-1, 3)[:, :2]
            if np.any(xy < 0.0) or np.any(xy > 1.0):
                raise KpseqError(f"{where}: detected {hand} hand x/y outside [0, 1]")
        elif np.any(block != 0.0):
            raise KpseqError(f"{where}: undetected {hand} hand has nonzero landmarks")


def quantize32(values: np.ndarray) -> np.ndarray:
    """Round-trip an array through 32-bit floats (the stored precision)."""
    return np.asarray(values, dtype=np.float32).astype(np.float64)


def write_kpseq(seq: KeypointSequence, destination: str | Path) -> None:
    """Write one sample as a KPSEQ file (UTF-8 JSON, one sample per file).

    Coordinates are quantized to 32-bit floats so that a parse/write cycle
    is byte-stable.  Refuses to write an invariant-violating sequence.
    """
    validate_sequence(seq)
    frames32 = np.asarray(seq.frames, dtype=np.float32)
    doc = {
        "schema": SCHEMA_ID,
        "sample_id": seq.sample_id,
        "dataset_id": seq.dataset_id,
        "label": seq.label,
        "concept": seq.concept,
        "fps": float(seq.fps),
        "landmark_layout": LAYOUT_ID,
        "presence": [[bool(l), bool(r)] for l, r in seq.presence],
        "frames": [[float(v) for v in row] for row in frames32],
    }
    Path(destination).write_text(
        json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8"
    )


def parse_kpseq(source: str | Path) -> KeypointSequence:
    """Parse and validate a KPSEQ file; raises KpseqError on any schema problem."""
    try:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise KpseqError(f"{source}: not valid JSON ({exc})") from exc
    return sequence_from_dict(doc, where=str(source))


def sequence_from_dict(doc: dict, where: str = "<kpseq>") -> KeypointSequence:
    """Build a validated KeypointSequence from a decoded KPSEQ document."""
    if not isinstance(doc, dict):
        raise KpseqError(f"{where}: expected a JSON object")
    schema = doc.get("schema")
    if schema != SCHEMA_ID:
        raise KpseqError(f"{where}: unsupported schema {schema!r} (expected {SCHEMA_ID!r})")
    layout = doc.get("landmark_layout")
    if layout != LAYOUT_ID:
        raise KpseqError(f"{where}: unsupported landmark layout {layout!r}")
    for key in ("sample_id", "dataset_id", "label", "fps", "presence", "frames"):
        if key not in doc:
            raise KpseqError(f"{where}: missing field {key!r}")
    frames = doc["frames"]
    if not isinstance(frames, list) or not frames:
        raise KpseqError(f"{where}: frames must be a non-empty array")
    for t, row in enumerate(frames):
        if not isinstance(row, list) or len(row) != FRAME_WIDTH:
            raise KpseqError(
                f"{where}: frame {t} has width {len(row) if isinstance(row, list) else '?'}"
                f" != {FRAME_WIDTH}"
            )
    presence = doc["presence"]
    if not isinstance(presence, list) or len(presence) != len(frames):
        raise KpseqError(f"{where}: presence length does not match frame count")

    seq = KeypointSequence(
        sample_id=str(doc["sample_id"]),
        dataset_id=str(doc["dataset_id"]),
        label=str(doc["label"]),
        concept=doc.get("concept"),
        fps=float(doc["fps"]),
        frames=quantize32(np.array(frames, dtype=np.float64)),
        presence=np.array(presence, dtype=bool),
    )
    validate_sequence(seq)
    return seq


def filter_frames(seq: KeypointSequence, threshold: float = 0.6) -> KeypointSequence:
    """Keep exactly the frames where either pose wrist is raised above the threshold.

    A frame survives when min(left pose-wrist y, right pose-wrist y) < threshold
    (y grows downward, so smaller y means a raised hand).  Frame order and
    presence flags are untouched.  Raises KpseqError naming the sample when
    nothing survives -- the signature of an all-rest sample.
    """
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    keep = seq.wrist_y() < threshold
    if not np.any(keep):
        raise KpseqError(
            f"{seq.sample_id}: no frame has a pose-wrist y below {threshold} "
            "(all-rest sample)"
        )
    return KeypointSequence(
        sample_id=seq.sample_id,
        dataset_id=seq.dataset_id,
        label=seq.label,
        concept=seq.concept,
        fps=seq.fps,
        frames=seq.frames[keep].copy(),
        presence=seq.presence[keep].copy(),
    )
