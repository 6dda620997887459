"""Paired (MLP width, GRU width) hyperparameter grid with the earliest-best tie-break."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .nn import Dims, init_params
from .training import LabeledDataset, TrainConfig, train

DEFAULT_PAIRS = [(256, 512), (512, 1024), (1024, 2048), (2000, 3000), (2048, 4096)]
METRICS = ("accuracy", "macro_f1")


class GridError(RuntimeError):
    """One or more grid runs failed; the message carries the per-pair report."""


@dataclass
class GridSpec:
    pairs: list[tuple[int, int]] = field(default_factory=lambda: list(DEFAULT_PAIRS))
    metric: str = "accuracy"
    train: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        if not self.pairs:
            raise ValueError("grid needs at least one (mlp, gru) pair")
        if len(set(self.pairs)) != len(self.pairs):
            raise ValueError("grid pairs must be unique")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")
        self.train.validate()


@dataclass
class GridEntry:
    mlp_hidden: int
    gru_hidden: int
    accuracy: float
    macro_f1: float
    best_metric_epoch: int  # earliest epoch reaching the selection metric's maximum
    stopped_epoch: int

    def value(self, metric: str) -> float:
        return self.accuracy if metric == "accuracy" else self.macro_f1


@dataclass
class GridResult:
    entries: list[GridEntry]
    metric: str
    winner: int


def select_winner(entries: list[GridEntry], metric: str) -> int:
    """Pick the entry maximizing the metric; ties go to the smaller
    best_metric_epoch, remaining ties to list order."""
    if not entries:
        raise ValueError("no grid entries")
    best = 0
    for i in range(1, len(entries)):
        cand, champ = entries[i], entries[best]
        if cand.value(metric) > champ.value(metric) or (
            cand.value(metric) == champ.value(metric)
            and cand.best_metric_epoch < champ.best_metric_epoch
        ):
            best = i
    return best


def _run_pair(args) -> GridEntry:
    pair, input_width, config, metric, train_set, eval_set = args
    mlp_hidden, gru_hidden = pair
    dims = Dims(
        input=input_width,
        mlp_hidden=mlp_hidden,
        gru_hidden=gru_hidden,
        num_classes=train_set.num_classes,
    )
    params = init_params(dims, config.seed)
    result = train(params, train_set, config, eval_set=eval_set)
    return GridEntry(
        mlp_hidden=mlp_hidden,
        gru_hidden=gru_hidden,
        accuracy=result.best_metric_value("accuracy"),
        macro_f1=result.best_metric_value("macro_f1"),
        best_metric_epoch=result.best_metric_epochs[metric],
        stopped_epoch=result.stopped_epoch,
    )


def run_grid(
    spec: GridSpec,
    train_set: LabeledDataset,
    eval_set: LabeledDataset,
    jobs: int = 1,
) -> GridResult:
    """Train one model per pair from a fresh seeded init and apply the
    selection rule.  Runs share nothing, so jobs > 1 executes pairs in
    parallel processes with identical results.
    """
    spec.validate()
    input_width = train_set.features[0].shape[1]
    tasks = [
        (pair, input_width, replace(spec.train), spec.metric, train_set, eval_set)
        for pair in spec.pairs
    ]
    outcomes: list[GridEntry | Exception] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_pair, task) for task in tasks]
            for future in futures:
                try:
                    outcomes.append(future.result())
                except Exception as exc:  # noqa: BLE001 - collected into the report
                    outcomes.append(exc)
    else:
        for task in tasks:
            try:
                outcomes.append(_run_pair(task))
            except Exception as exc:  # noqa: BLE001
                outcomes.append(exc)

    failures = [
        f"  {pair[0]}x{pair[1]}: {out}"
        for pair, out in zip(spec.pairs, outcomes)
        if isinstance(out, Exception)
    ]
    if failures:
        raise GridError("grid aborted, per-pair report:\n" + "\n".join(failures))

    entries = [out for out in outcomes if isinstance(out, GridEntry)]
    return GridResult(
        entries=entries,
        metric=spec.metric,
        winner=select_winner(entries, spec.metric),
    )


def grid_report_csv(result: GridResult) -> str:
    """Grid report: `mlp,gru,accuracy,macro_f1,best_epoch,stopped_epoch`."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["mlp", "gru", "accuracy", "macro_f1", "best_epoch", "stopped_epoch"])
    for entry in result.entries:
        writer.writerow([
            entry.mlp_hidden, entry.gru_hidden,
            f"{entry.accuracy:.6f}", f"{entry.macro_f1:.6f}",
            entry.best_metric_epoch, entry.stopped_epoch,
        ])
    return buf.getvalue()


def write_grid_report(result: GridResult, destination: str | Path) -> None:
    Path(destination).write_text(grid_report_csv(result), encoding="utf-8")
