"""Confusion matrix and the accuracy / macro-F1 scores derived from it."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ConfusionMatrix:
    """K x K counts; rows are true classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self) -> None:
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError(f"confusion matrix must be square, got {self.counts.shape}")
        if np.any(self.counts < 0):
            raise ValueError("confusion matrix counts must be non-negative")

    @classmethod
    def empty(cls, num_classes: int) -> "ConfusionMatrix":
        return cls(np.zeros((num_classes, num_classes), dtype=np.int64))

    @classmethod
    def from_predictions(
        cls, true: np.ndarray, predicted: np.ndarray, num_classes: int
    ) -> "ConfusionMatrix":
        true = np.asarray(true, dtype=np.intp)
        predicted = np.asarray(predicted, dtype=np.intp)
        if true.shape != predicted.shape:
            raise ValueError("true and predicted label arrays differ in length")
        cm = cls.empty(num_classes)
        np.add.at(cm.counts, (true, predicted), 1)
        return cm

    @property
    def num_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def add(self, true: int, predicted: int) -> None:
        self.counts[true, predicted] += 1

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        """Cell-wise addition, used when evaluation is sharded across workers."""
        if other.counts.shape != self.counts.shape:
            raise ValueError("cannot merge confusion matrices of different sizes")
        return ConfusionMatrix(self.counts + other.counts)


def accuracy(cm: ConfusionMatrix) -> float:
    """Fraction of correctly classified samples, as a percentage.

    The multiclass reading of the TP/TN accuracy formula: correct / total,
    i.e. micro-averaged one-vs-rest accuracy collapsed to a single number.
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total * 100.0


def macro_f1(cm: ConfusionMatrix) -> float:
    """Unweighted mean of per-class F1, as a percentage.

    Per class, precision = TP/(TP+FP) and recall = TP/(TP+FN), each 0 when the
    denominator is 0; F1 is 0 when precision + recall is 0.  The mean runs over
    all K classes, so classes without support contribute an F1 of 0.
    """
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    precision = np.divide(tp, tp + fp, out=np.zeros_like(tp), where=(tp + fp) > 0)
    recall = np.divide(tp, tp + fn, out=np.zeros_like(tp), where=(tp + fn) > 0)
    pr = precision + recall
    f1 = np.divide(2.0 * precision * recall, pr, out=np.zeros_like(pr), where=pr > 0)
    return float(f1.mean()) * 100.0


@dataclass
class Metrics:
    """Evaluation result bundle: the two scores plus the matrix they came from."""

    accuracy: float
    macro_f1: float
    confusion: ConfusionMatrix
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_confusion(cls, cm: ConfusionMatrix) -> "Metrics":
        return cls(accuracy=accuracy(cm), macro_f1=macro_f1(cm), confusion=cm)

    def value(self, metric: str) -> float:
        if metric == "accuracy":
            return self.accuracy
        if metric == "macro_f1":
            return self.macro_f1
        raise ValueError(f"unknown metric {metric!r}")
