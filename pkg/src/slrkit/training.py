"""Batched training loop with loss-patience early stopping, plus evaluation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .kpseq import KeypointSequence
from .metrics import ConfusionMatrix, Metrics
from .nn import (
    AdamState,
    ModelParams,
    adam_step,
    backward,
    cross_entropy,
    forward_batch,
    one_hot,
    softmax,
)

MONITORS = ("train_loss", "eval_loss")


@dataclass
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 32
    patience_epochs: int = 200
    max_epochs: int | None = None
    seed: int = 0
    shuffle: bool = True
    monitor: str = "train_loss"

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.patience_epochs < 1:
            raise ValueError(f"patience_epochs must be >= 1, got {self.patience_epochs}")
        if self.max_epochs is not None and self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.monitor not in MONITORS:
            raise ValueError(f"monitor must be one of {MONITORS}, got {self.monitor!r}")


@dataclass
class LabeledDataset:
    """Feature sequences plus labels and the class-to-index map they share."""

    features: list[np.ndarray]  # each (T_i, F)
    labels: list[str]
    label_map: dict[str, int]

    def __post_init__(self) -> None:
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")
        indices = sorted(self.label_map.values())
        if indices != list(range(len(self.label_map))):
            raise ValueError("label_map indices must be a bijection onto 0..K-1")
        for label in self.labels:
            if label not in self.label_map:
                raise ValueError(f"label {label!r} outside the class map")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def num_classes(self) -> int:
        return len(self.label_map)

    def targets(self) -> np.ndarray:
        return np.array([self.label_map[l] for l in self.labels], dtype=np.intp)

    @classmethod
    def from_sequences(
        cls,
        sequences: list[KeypointSequence],
        label_map: dict[str, int] | None = None,
    ) -> "LabeledDataset":
        if label_map is None:
            label_map = {l: i for i, l in enumerate(sorted({s.label for s in sequences}))}
        return cls(
            features=[s.frames for s in sequences],
            labels=[s.label for s in sequences],
            label_map=label_map,
        )


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float | None = None
    macro_f1: float | None = None
    eval_loss: float | None = None


@dataclass
class EarlyStopper:
    """Loss-patience stopping rule: halt once `patience` epochs pass without
    a strict improvement of the monitored loss."""

    patience: int
    best_loss: float = math.inf
    best_epoch: int = 0
    epoch: int = 0

    def update(self, loss: float) -> bool:
        """Record one epoch's loss; returns True when training should stop."""
        self.epoch += 1
        improved = loss < self.best_loss
        if improved:
            self.best_loss = loss
            self.best_epoch = self.epoch
        return (self.epoch - self.best_epoch) >= self.patience

    @property
    def improved(self) -> bool:
        return self.best_epoch == self.epoch


@dataclass
class TrainResult:
    params: ModelParams  # snapshot from the best-loss epoch
    history: list[EpochRecord]
    best_loss_epoch: int
    stopped_epoch: int
    config: TrainConfig
    label_map: dict[str, int]
    best_metric_epochs: dict[str, int] = field(default_factory=dict)

    def best_metric_value(self, metric: str) -> float:
        epoch = self.best_metric_epochs[metric]
        return getattr(self.history[epoch - 1], metric)


def pad_batch(features: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad variable-length sequences to (B, T_max, F) plus valid lengths."""
    if not features:
        raise ValueError("empty batch")
    lengths = np.array([f.shape[0] for f in features], dtype=np.intp)
    width = features[0].shape[1]
    batch = np.zeros((len(features), int(lengths.max()), width))
    for i, f in enumerate(features):
        batch[i, : f.shape[0], :] = f
    return batch, lengths


def _batch_indices(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def evaluate(
    params: ModelParams, data_set: LabeledDataset, batch_size: int = 32
) -> Metrics:
    """Argmax-predict every sample and derive accuracy / macro F1 / confusion.

    Batching pads with zero frames and masks beyond each valid length, so the
    confusion matrix is independent of batch_size.
    """
    if len(data_set) == 0:
        raise ValueError("cannot evaluate an empty dataset")
    if data_set.num_classes != params.dims.num_classes:
        raise ValueError(
            f"dataset has {data_set.num_classes} classes, model expects "
            f"{params.dims.num_classes}"
        )
    targets = data_set.targets()
    cm = ConfusionMatrix.empty(data_set.num_classes)
    losses = []
    order = np.arange(len(data_set))
    for idx in _batch_indices(order, batch_size):
        x, lengths = pad_batch([data_set.features[i] for i in idx])
        logits, _ = forward_batch(params, x, lengths)
        predicted = np.argmax(logits, axis=1)
        np.add.at(cm.counts, (targets[idx], predicted), 1)
        probs = softmax(logits)
        losses.append((cross_entropy(probs, one_hot(targets[idx], cm.num_classes)), len(idx)))
    metrics = Metrics.from_confusion(cm)
    metrics.extras["loss"] = sum(l * n for l, n in losses) / len(data_set)
    return metrics


def train(
    params: ModelParams,
    train_set: LabeledDataset,
    config: TrainConfig,
    eval_set: LabeledDataset | None = None,
) -> TrainResult:
    """Train until the monitored loss stops improving for `patience_epochs`.

    Per epoch: seeded shuffle, zero-padded batches of `batch_size` with
    masking beyond valid lengths, one forward/backward/Adam step per batch.
    Returns the parameters snapshot from the best-loss epoch.  When an eval
    set is given, its accuracy and macro F1 are recorded each epoch and the
    earliest epoch achieving each metric's maximum is retained.
    """
    config.validate()
    if len(train_set) == 0:
        raise ValueError("training set is empty")
    if train_set.num_classes != params.dims.num_classes:
        raise ValueError(
            f"training set has {train_set.num_classes} classes, model expects "
            f"{params.dims.num_classes}"
        )
    if config.monitor == "eval_loss" and eval_set is None:
        raise ValueError("monitor='eval_loss' requires an eval set")

    rng = np.random.default_rng(config.seed)
    state = AdamState.for_params(params, learning_rate=config.learning_rate)
    stopper = EarlyStopper(patience=config.patience_epochs)
    targets = train_set.targets()
    num_classes = train_set.num_classes

    best_params = params.copy()
    history: list[EpochRecord] = []
    best_values: dict[str, float] = {}
    best_metric_epochs: dict[str, int] = {}

    epoch = 0
    while True:
        epoch += 1
        order = rng.permutation(len(train_set)) if config.shuffle \
            else np.arange(len(train_set))
        weighted_loss = 0.0
        for idx in _batch_indices(order, config.batch_size):
            x, lengths = pad_batch([train_set.features[i] for i in idx])
            logits, cache = forward_batch(params, x, lengths)
            loss = cross_entropy(softmax(logits), one_hot(targets[idx], num_classes))
            grads = backward(params, cache, targets[idx])
            params, state = adam_step(params, grads, state)
            weighted_loss += loss * len(idx)
        epoch_loss = weighted_loss / len(train_set)

        record = EpochRecord(epoch=epoch, loss=epoch_loss)
        if eval_set is not None:
            metrics = evaluate(params, eval_set, batch_size=config.batch_size)
            record.accuracy = metrics.accuracy
            record.macro_f1 = metrics.macro_f1
            record.eval_loss = metrics.extras["loss"]
            for name in ("accuracy", "macro_f1"):
                value = getattr(record, name)
                if name not in best_values or value > best_values[name]:
                    best_values[name] = value
                    best_metric_epochs[name] = epoch
        history.append(record)

        monitored = epoch_loss if config.monitor == "train_loss" else record.eval_loss
        should_stop = stopper.update(monitored)
        if stopper.improved:
            best_params = params.copy()
        if should_stop or (config.max_epochs is not None and epoch >= config.max_epochs):
            break

    return TrainResult(
        params=best_params,
        history=history,
        best_loss_epoch=stopper.best_epoch,
        stopped_epoch=epoch,
        config=replace(config),
        label_map=dict(train_set.label_map),
        best_metric_epochs=best_metric_epochs,
    )


def history_csv(history: list[EpochRecord]) -> str:
    """History as CSV text: header `epoch,loss,accuracy,macro_f1`, blanks when no eval ran."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "loss", "accuracy", "macro_f1"])
    for rec in history:
        writer.writerow([
            rec.epoch,
            f"{rec.loss:.10g}",
            "" if rec.accuracy is None else f"{rec.accuracy:.6f}",
            "" if rec.macro_f1 is None else f"{rec.macro_f1:.6f}",
        ])
    return buf.getvalue()


def write_history(history: list[EpochRecord], destination: str | Path) -> None:
    Path(destination).write_text(history_csv(history), encoding="utf-8")


def result_summary(result: TrainResult) -> dict:
    """JSON-ready training summary (schema documented in the README)."""
    best = result.history[result.best_loss_epoch - 1]
    return {
        "stopped_epoch": result.stopped_epoch,
        "best_loss_epoch": result.best_loss_epoch,
        "best_loss": best.loss,
        "final_loss": result.history[-1].loss,
        "best_metric_epochs": dict(result.best_metric_epochs),
        "config": {
            "learning_rate": result.config.learning_rate,
            "batch_size": result.config.batch_size,
            "patience_epochs": result.config.patience_epochs,
            "max_epochs": result.config.max_epochs,
            "seed": result.config.seed,
            "shuffle": result.config.shuffle,
            "monitor": result.config.monitor,
        },
    }


def metrics_json(
    metrics: Metrics,
    best_epoch: int | None = None,
    stopped_epoch: int | None = None,
) -> dict:
    """The metrics JSON schema used by the CLI: accuracy, macro_f1, confusion, epochs."""
    return {
        "accuracy": metrics.accuracy,
        "macro_f1": metrics.macro_f1,
        "confusion": metrics.confusion.counts.tolist(),
        "best_epoch": best_epoch,
        "stopped_epoch": stopped_epoch,
    }
