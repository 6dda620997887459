"""Per-concept hand-activity density maps and cross-dataset concept similarity."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kpseq import HAND_POINTS, LEFT_HAND_START, RIGHT_HAND_START, KeypointSequence

SELECTORS = ("wrists", "all")


@dataclass
class ActivityGrid:
    """G x G histogram of hand-landmark positions over the unit square.

    cells[row, col] indexes row by y and column by x (image convention),
    so exported maps render the way the underlying video looks.
    """

    cells: np.ndarray
    count: int
    concept: str | None = None
    dataset_id: str | None = None

    def __post_init__(self) -> None:
        self.cells = np.asarray(self.cells, dtype=np.float64)
        if self.cells.ndim != 2 or self.cells.shape[0] != self.cells.shape[1]:
            raise ValueError(f"grid must be square, got shape {self.cells.shape}")
        if np.any(self.cells < 0):
            raise ValueError("grid cells must be non-negative")

    @property
    def size(self) -> int:
        return self.cells.shape[0]

    def merge(self, other: "ActivityGrid") -> "ActivityGrid":
        """Cell-wise addition, for sharded accumulation."""
        if other.size != self.size:
            raise ValueError("cannot merge grids of different sizes")
        return ActivityGrid(
            self.cells + other.cells, self.count + other.count,
            self.concept, self.dataset_id,
        )


def _hand_landmark_indices(selector: str) -> tuple[list[int], list[int]]:
    """Per-hand landmark indices for a selector: wrist only, or all 21 points."""
    if selector == "wrists":
        return [LEFT_HAND_START], [RIGHT_HAND_START]
    if selector == "all":
        return (
            list(range(LEFT_HAND_START, LEFT_HAND_START + HAND_POINTS)),
            list(range(RIGHT_HAND_START, RIGHT_HAND_START + HAND_POINTS)),
        )
    raise ValueError(f"landmark selector must be one of {SELECTORS}, got {selector!r}")


def accumulate(
    sequences: list[KeypointSequence],
    grid_size: int = 64,
    selector: str = "wrists",
    concept: str | None = None,
) -> ActivityGrid:
    """Histogram the selected hand landmarks of every frame into a G x G grid.

    When concept is given, only sequences tagged with it contribute.  Landmarks
    of undetected hands are skipped via the presence flags; positions at the
    upper edge (x or y = 1.0) clamp into the last cell.
    """
    if grid_size < 1:
        raise ValueError(f"grid_size must be >= 1, got {grid_size}")
    left_idx, right_idx = _hand_landmark_indices(selector)
    matching = [s for s in sequences if concept is None or s.concept == concept]
    if not matching:
        raise ValueError(
            f"no sequences match concept {concept!r}" if concept else "no sequences given"
        )

    cells = np.zeros((grid_size, grid_size))
    count = 0
    for seq in matching:
        for side, indices in ((0, left_idx), (1, right_idx)):
            detected = seq.presence[:, side]
            if not np.any(detected):
                continue
            for landmark in indices:
                xy = seq.landmark_xy(landmark)[detected]
                cols = np.minimum((xy[:, 0] * grid_size).astype(int), grid_size - 1)
                rows = np.minimum((xy[:, 1] * grid_size).astype(int), grid_size - 1)
                np.add.at(cells, (rows, cols), 1.0)
                count += xy.shape[0]
    dataset_ids = {s.dataset_id for s in matching}
    return ActivityGrid(
        cells=cells,
        count=count,
        concept=concept,
        dataset_id=dataset_ids.pop() if len(dataset_ids) == 1 else None,
    )


def normalize(grid: ActivityGrid) -> ActivityGrid:
    """Divide by total mass so the cells sum to 1; idempotent."""
    if grid.count == 0:
        raise ValueError("cannot normalize an empty grid")
    total = grid.cells.sum()
    if total == 0:
        raise ValueError("cannot normalize a grid with zero mass")
    return ActivityGrid(grid.cells / total, grid.count, grid.concept, grid.dataset_id)


def concept_similarity(a: ActivityGrid, b: ActivityGrid) -> float:
    """Pearson correlation of the flattened normalized grids, in [-1, 1].

    Defined as 0 when either grid has zero variance (e.g. uniform activity).
    """
    if a.size != b.size:
        raise ValueError(f"grid size mismatch: {a.size} vs {b.size}")
    for name, grid in (("first", a), ("second", b)):
        if abs(grid.cells.sum() - 1.0) > 1e-6:
            raise ValueError(f"{name} grid is not normalized (cells must sum to 1)")
    va = a.cells.ravel() - a.cells.mean()
    vb = b.cells.ravel() - b.cells.mean()
    denom = np.sqrt((va * va).sum() * (vb * vb).sum())
    if denom == 0:
        return 0.0
    return float((va * vb).sum() / denom)


def grid_csv(grid: ActivityGrid) -> str:
    """Grid as CSV text: G rows of G comma-separated cell values."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in grid.cells:
        writer.writerow([f"{v:.10g}" for v in row])
    return buf.getvalue()


def write_grid_csv(grid: ActivityGrid, destination: str | Path) -> None:
    Path(destination).write_text(grid_csv(grid), encoding="utf-8")


def read_grid_csv(source: str | Path) -> ActivityGrid:
    rows = [
        [float(v) for v in line]
        for line in csv.reader(io.StringIO(Path(source).read_text(encoding="utf-8")))
        if line
    ]
    cells = np.array(rows, dtype=np.float64)
    return ActivityGrid(cells=cells, count=int(round(cells.sum())) or 1)


def write_grid_pgm(grid: ActivityGrid, destination: str | Path) -> None:
    """8-bit binary PGM (P5) visualization, scaled so the hottest cell is white."""
    peak = grid.cells.max()
    scaled = (
        np.zeros_like(grid.cells, dtype=np.uint8)
        if peak == 0
        else np.round(grid.cells / peak * 255.0).astype(np.uint8)
    )
    header = f"P5\n{grid.size} {grid.size}\n255\n".encode("ascii")
    Path(destination).write_bytes(header + scaled.tobytes())
