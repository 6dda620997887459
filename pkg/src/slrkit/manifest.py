"""Dataset manifests: CSV rows of (path, label, concept, split) plus stratified splitting."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

SPLITS = ("train", "test", "unassigned")
HEADER = ["path", "label", "concept", "split"]


class ManifestError(ValueError):
    """Malformed manifest or impossible split request."""


@dataclass(frozen=True)
class SampleRecord:
    path: str
    label: str
    concept: str | None = None
    split: str = "unassigned"


@dataclass
class Manifest:
    rows: list[SampleRecord]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for row in self.rows:
            if row.path in seen:
                raise ManifestError(f"duplicate path {row.path!r}")
            seen.add(row.path)
            if row.split not in SPLITS:
                raise ManifestError(f"{row.path}: unknown split {row.split!r}")

    def __len__(self) -> int:
        return len(self.rows)

    def subset(self, split: str) -> list[SampleRecord]:
        return [r for r in self.rows if r.split == split]

    def check_label_coverage(self) -> None:
        """Every label appearing in test must also appear in train (checked at training time)."""
        train_labels = {r.label for r in self.subset("train")}
        missing = sorted({r.label for r in self.subset("test")} - train_labels)
        if missing:
            raise ManifestError(f"labels in test but not in train: {', '.join(missing)}")


def write_manifest(manifest: Manifest, destination: str | Path) -> None:
    """Write the manifest CSV (header `path,label,concept,split`, LF endings)."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for row in manifest.rows:
        writer.writerow([row.path, row.label, row.concept or "", row.split])
    Path(destination).write_text(buf.getvalue(), encoding="utf-8")


def read_manifest(source: str | Path) -> Manifest:
    text = Path(source).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ManifestError(f"{source}: empty manifest") from None
    if header != HEADER:
        raise ManifestError(f"{source}: bad header {header!r} (expected {HEADER!r})")
    rows = []
    for line in reader:
        if not line:
            continue
        if len(line) != 4:
            raise ManifestError(f"{source}: row with {len(line)} fields: {line!r}")
        path, label, concept, split = line
        rows.append(SampleRecord(path, label, concept or None, split))
    return Manifest(rows)


def load_sequences(
    manifest: Manifest,
    base_dir: str | Path,
    split: str | None = None,
    filter_threshold: float | None = None,
) -> list:
    """Parse every kpseq file in a manifest split (None = all rows).

    Paths are resolved relative to base_dir.  When filter_threshold is given
    the wrist-height frame filter is applied to each sequence.
    """
    from .kpseq import filter_frames, parse_kpseq

    base = Path(base_dir)
    rows = manifest.rows if split is None else manifest.subset(split)
    sequences = []
    for row in rows:
        seq = parse_kpseq(base / row.path)
        if row.concept and seq.concept is None:
            seq.concept = row.concept
        if filter_threshold is not None:
            seq = filter_frames(seq, filter_threshold)
        sequences.append(seq)
    return sequences


def split_manifest(manifest: Manifest, train_fraction: float, seed: int) -> Manifest:
    """Stratified random train/test assignment, deterministic per seed.

    Per class, round(n * train_fraction) rows (half-up) go to train, clamped
    so each side keeps at least one row.  All input rows must be unassigned;
    a class with a single sample cannot be stratified and raises.
    """
    if not (0.0 < train_fraction < 1.0):
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if any(r.split != "unassigned" for r in manifest.rows):
        raise ManifestError("split_manifest requires all rows unassigned")

    by_label: dict[str, list[int]] = {}
    for i, row in enumerate(manifest.rows):
        by_label.setdefault(row.label, []).append(i)

    rng = np.random.default_rng(seed)
    assignment = ["test"] * len(manifest.rows)
    for label in sorted(by_label):
        indices = by_label[label]
        n = len(indices)
        if n < 2:
            raise ManifestError(f"class {label!r} has a single sample; cannot stratify")
        n_train = int(math.floor(n * train_fraction + 0.5))
        n_train = min(max(n_train, 1), n - 1)
        order = rng.permutation(n)
        for j in order[:n_train]:
            assignment[indices[j]] = "train"

    return Manifest(
        [replace(row, split=assignment[i]) for i, row in enumerate(manifest.rows)]
    )
