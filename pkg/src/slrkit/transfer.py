"""Model checkpoints and weight-initialization transfer learning.

Checkpoint layout (bit-exact, little-endian):

    bytes 0-3    ASCII magic "SLRM"
    bytes 4-7    u32 format version (= 1)
    bytes 8-11   u32 byte length L of the metadata JSON
    bytes 12..   UTF-8 JSON metadata, containing the ordered tensor directory
    remainder    IEEE-754 32-bit floats, row-major, concatenated in directory order

Transfer copies the learned MLP tensors from a source checkpoint into a
freshly initialized target model (optionally the GRU tensors too); the
output layer is always re-initialized because source and target class
counts generally differ.
"""

from __future__ import annotations

import enum
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kpseq import LAYOUT_ID
from .nn import PARAM_NAMES, Dims, ModelParams, expected_shapes, init_params

MAGIC = b"SLRM"
VERSION = 1

MLP_TENSORS = ("W1", "b1")
GRU_TENSORS = ("Wz", "Wr", "Wn", "Uz", "Ur", "Un", "bz", "br", "bn")


class CheckpointError(ValueError):
    """Corrupt or incompatible checkpoint file."""


class TransferScope(enum.Enum):
    MLP_ONLY = "mlp"
    MLP_AND_GRU = "mlp+gru"

    @classmethod
    def parse(cls, text: str) -> "TransferScope":
        for scope in cls:
            if scope.value == text:
                return scope
        raise ValueError(
            f"unknown transfer scope {text!r} (expected 'mlp' or 'mlp+gru')"
        )

    @property
    def tensor_names(self) -> tuple[str, ...]:
        if self is TransferScope.MLP_ONLY:
            return MLP_TENSORS
        return MLP_TENSORS + GRU_TENSORS


@dataclass
class CheckpointMeta:
    label_map: dict[str, int]
    landmark_layout: str = LAYOUT_ID
    provenance: dict = field(default_factory=dict)

    def validate(self, num_classes: int) -> None:
        if len(self.label_map) != num_classes:
            raise CheckpointError(
                f"label map has {len(self.label_map)} classes, model expects {num_classes}"
            )
        if sorted(self.label_map.values()) != list(range(num_classes)):
            raise CheckpointError("label map indices must be a bijection onto 0..K-1")


@dataclass
class Checkpoint:
    """Portable serialized model: parameters plus label map and provenance."""

    params: ModelParams
    meta: CheckpointMeta


def save_checkpoint(
    params: ModelParams, meta: CheckpointMeta, destination: str | Path
) -> None:
    """Serialize params (32-bit float payload) and metadata; see module docstring."""
    params.validate()
    meta.validate(params.dims.num_classes)
    directory = []
    payload = bytearray()
    for name, tensor in params.tensors():
        directory.append({"name": name, "shape": list(tensor.shape)})
        payload += np.ascontiguousarray(tensor, dtype="<f4").tobytes()
    metadata = {
        "dims": {
            "input": params.dims.input,
            "mlp_hidden": params.dims.mlp_hidden,
            "gru_hidden": params.dims.gru_hidden,
            "num_classes": params.dims.num_classes,
        },
        "label_map": meta.label_map,
        "landmark_layout": meta.landmark_layout,
        "provenance": meta.provenance,
        "tensors": directory,
    }
    blob = json.dumps(metadata, separators=(",", ":")).encode("utf-8")
    with open(destination, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(bytes(payload))


def load_checkpoint(source: str | Path) -> Checkpoint:
    """Read and verify a checkpoint; every tensor is reproduced bit-exactly
    at the stored 32-bit precision."""
    raw = Path(source).read_bytes()
    if len(raw) < 12 or raw[:4] != MAGIC:
        raise CheckpointError(f"{source}: bad magic (not a checkpoint file)")
    version = struct.unpack_from("<I", raw, 4)[0]
    if version != VERSION:
        raise CheckpointError(f"{source}: unsupported version {version}")
    meta_len = struct.unpack_from("<I", raw, 8)[0]
    if len(raw) < 12 + meta_len:
        raise CheckpointError(f"{source}: truncated metadata")
    try:
        metadata = json.loads(raw[12 : 12 + meta_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{source}: corrupted metadata ({exc})") from exc

    try:
        dims = Dims(**metadata["dims"])
        directory = metadata["tensors"]
        label_map = {str(k): int(v) for k, v in metadata["label_map"].items()}
    except (KeyError, TypeError) as exc:
        raise CheckpointError(f"{source}: corrupted directory ({exc})") from exc

    shapes = expected_shapes(dims)
    if [entry.get("name") for entry in directory] != list(PARAM_NAMES):
        raise CheckpointError(f"{source}: tensor directory does not list the model tensors")
    total = 0
    for entry in directory:
        expected = shapes[entry["name"]]
        if tuple(entry.get("shape", ())) != expected:
            raise CheckpointError(
                f"{source}: tensor {entry['name']} has shape {entry.get('shape')}, "
                f"expected {list(expected)}"
            )
        total += int(np.prod(expected))
    payload = raw[12 + meta_len :]
    if len(payload) != 4 * total:
        raise CheckpointError(
            f"{source}: payload holds {len(payload)} bytes, directory implies {4 * total}"
        )

    tensors: dict[str, np.ndarray] = {}
    offset = 0
    for entry in directory:
        shape = shapes[entry["name"]]
        count = int(np.prod(shape))
        values = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
        tensors[entry["name"]] = values.astype(np.float64).reshape(shape)
        offset += 4 * count

    params = ModelParams(dims, **tensors)
    params.validate()
    meta = CheckpointMeta(
        label_map=label_map,
        landmark_layout=str(metadata.get("landmark_layout", LAYOUT_ID)),
        provenance=dict(metadata.get("provenance", {})),
    )
    meta.validate(dims.num_classes)
    return Checkpoint(params=params, meta=meta)


def init_from_source(
    source: Checkpoint,
    target_dims: Dims,
    target_label_map: dict[str, int],
    scope: TransferScope = TransferScope.MLP_ONLY,
    seed: int = 0,
) -> Checkpoint:
    """Build a target model whose transferred tensors are copied bit-exactly
    from the source and whose remaining tensors (always including the output
    layer, sized for the target class count) are freshly initialized from seed.
    """
    src_dims = source.params.dims
    if src_dims.input != target_dims.input:
        raise CheckpointError(
            f"input width mismatch: source {src_dims.input} vs target "
            f"{target_dims.input} (incompatible landmark layouts)"
        )
    if src_dims.mlp_hidden != target_dims.mlp_hidden:
        raise CheckpointError(
            f"mlp_hidden mismatch: source {src_dims.mlp_hidden} vs target "
            f"{target_dims.mlp_hidden}"
        )
    if scope is TransferScope.MLP_AND_GRU and src_dims.gru_hidden != target_dims.gru_hidden:
        raise CheckpointError(
            f"gru_hidden mismatch: source {src_dims.gru_hidden} vs target "
            f"{target_dims.gru_hidden}"
        )

    params = init_params(target_dims, seed)
    for name in scope.tensor_names:
        setattr(params, name, getattr(source.params, name).copy())
    meta = CheckpointMeta(
        label_map=dict(target_label_map),
        landmark_layout=source.meta.landmark_layout,
        provenance={
            "initialized_from": source.meta.provenance.get("dataset_id"),
            "transfer_scope": scope.value,
            "seed": seed,
        },
    )
    meta.validate(target_dims.num_classes)
    return Checkpoint(params=params, meta=meta)


def relative_improvement(baseline_pct: float, tl_pct: float) -> float:
    """Relative change of a transfer-learning score over its baseline, in
    percent, rounded to 2 decimals."""
    if baseline_pct <= 0:
        raise ValueError(f"baseline must be > 0, got {baseline_pct}")
    return round((tl_pct - baseline_pct) / baseline_pct * 100.0, 2)
