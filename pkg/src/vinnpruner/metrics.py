"""Evaluation of a (masked) model over a dataset.

Produces accuracy, mean cross-entropy loss, a confusion matrix, per-class
one-vs-rest precision-recall curves, and per-layer sparsity counts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import Dataset, Masks, Model, forward

PROB_FLOOR = 1e-12


class MetricsError(ValueError):
    pass


@dataclass
class LayerSparsity:
    layer_index: int
    pruned: int
    total: int


@dataclass
class EvalReport:
    accuracy: float
    mean_loss: float
    confusion: np.ndarray  # [num_classes, num_classes], rows = true class
    pr_curves: list[list[tuple[float, float]]]  # per class: (recall, precision) points
    sparsity: list[LayerSparsity] = field(default_factory=list)

    @property
    def global_ratio(self) -> float:
        total = sum(s.total for s in self.sparsity)
        return sum(s.pruned for s in self.sparsity) / total if total else 0.0

    def to_dict(self) -> dict:
        return {
            "accuracy": float(self.accuracy),
            "mean_loss": float(self.mean_loss),
            "global_ratio": self.global_ratio,
            "confusion": self.confusion.tolist(),
            "pr_curves": [[[float(r), float(p)] for r, p in curve] for curve in self.pr_curves],
            "sparsity": [
                {"layer_index": s.layer_index, "pruned": s.pruned, "total": s.total}
                for s in self.sparsity
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            accuracy=float(d["accuracy"]),
            mean_loss=float(d["mean_loss"]),
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            pr_curves=[[(float(r), float(p)) for r, p in curve] for curve in d["pr_curves"]],
            sparsity=[
                LayerSparsity(s["layer_index"], s["pruned"], s["total"]) for s in d["sparsity"]
            ],
        )


def softmax(scores: np.ndarray) -> np.ndarray:
    z = scores.astype(np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def pr_curve(probs: np.ndarray, positives: np.ndarray) -> list[tuple[float, float]]:
    """One-vs-rest PR points swept over the sorted unique probabilities.

    A sample counts as predicted-positive when its probability is strictly
    above the threshold. Precision with zero predicted positives is defined
    as 1. The conventional (recall 0, precision 1) endpoint is appended.
    """
    n_pos = int(positives.sum())
    points = []
    for threshold in np.unique(probs):
        predicted = probs > threshold
        tp = int((predicted & positives).sum())
        n_pred = int(predicted.sum())
        precision = tp / n_pred if n_pred else 1.0
        recall = tp / n_pos if n_pos else 0.0
        points.append((recall, precision))
    points.append((0.0, 1.0))
    return points


def sparsity_counts(model: Model, masks: Masks) -> list[LayerSparsity]:
    return [
        LayerSparsity(i, int((masks[i] == 0).sum()), int(masks[i].size))
        for i in sorted(masks)
    ]


def evaluate(model: Model, masks: Masks | None, dataset: Dataset) -> EvalReport:
    if len(dataset.samples) == 0:
        raise MetricsError("dataset is empty")
    n_classes = dataset.num_classes
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    all_probs = np.empty((len(dataset.samples), n_classes), dtype=np.float64)
    total_loss = 0.0
    for i in range(len(dataset.samples)):
        scores = forward(model, masks, dataset.samples[i])
        probs = softmax(scores)
        all_probs[i] = probs
        label = int(dataset.labels[i])
        predicted = int(np.argmax(probs))  # argmax takes the lowest index on ties
        confusion[label, predicted] += 1
        total_loss += -np.log(max(probs[label], PROB_FLOOR))
    n = len(dataset.samples)
    curves = [
        pr_curve(all_probs[:, c], dataset.labels == c) for c in range(n_classes)
    ]
    return EvalReport(
        accuracy=float(np.trace(confusion)) / n,
        mean_loss=total_loss / n,
        confusion=confusion,
        pr_curves=curves,
        sparsity=sparsity_counts(model, masks) if masks is not None else [],
    )


@dataclass
class ReportDelta:
    accuracy_delta: float
    loss_delta: float
    sparsity_deltas: list[LayerSparsity]  # pruned-count delta per layer, total unchanged


def compare_reports(a: EvalReport, b: EvalReport) -> ReportDelta:
    """Pure arithmetic differences b - a; no thresholding."""
    if a.confusion.shape != b.confusion.shape:
        raise MetricsError(
            f"class-count mismatch: {a.confusion.shape[0]} vs {b.confusion.shape[0]}"
        )
    by_layer_a = {s.layer_index: s for s in a.sparsity}
    deltas = [
        LayerSparsity(s.layer_index, s.pruned - by_layer_a[s.layer_index].pruned, s.total)
        for s in b.sparsity
        if s.layer_index in by_layer_a
    ]
    return ReportDelta(
        accuracy_delta=b.accuracy - a.accuracy,
        loss_delta=b.mean_loss - a.mean_loss,
        sparsity_deltas=deltas,
    )
