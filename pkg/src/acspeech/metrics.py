"""Boundary and classification scoring."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np


@dataclass(frozen=True)
class MatchCounts:
    tp: int
    fp: int
    fn: int

    def __add__(self, other: "MatchCounts") -> "MatchCounts":
        return MatchCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def prf(counts: MatchCounts) -> tuple[float, float, float]:
    """Precision, recall, F1; each is 0 when its denominator is 0."""
    tp, fp, fn = counts.tp, counts.fp, counts.fn
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def match_boundaries(detected, ground_truth, tolerance: int) -> MatchCounts:
    """Greedy one-to-one matching within +/- ``tolerance`` frames.

    Ground-truth boundaries are visited in time order; each takes the nearest
    still-unmatched detection in its window (the earlier one on a tie).
    """
    det = np.sort(np.asarray(detected, dtype=np.int64))
    gt = np.sort(np.asarray(ground_truth, dtype=np.int64))
    used = np.zeros(det.size, dtype=bool)
    tp = 0
    for g in gt:
        lo = np.searchsorted(det, g - tolerance, side="left")
        hi = np.searchsorted(det, g + tolerance, side="right")
        best = -1
        for j in range(lo, hi):
            if used[j]:
                continue
            if best < 0 or abs(det[j] - g) < abs(det[best] - g):
                best = j
        if best >= 0:
            used[best] = True
            tp += 1
    return MatchCounts(tp, int(det.size - tp), int(gt.size - tp))


@dataclass
class BoundaryEvalReport:
    tolerance_frames: int
    per_seed: dict  # seed -> {"tp", "fp", "fn", "precision", "recall", "f1"}
    mean: dict = field(default_factory=dict)  # precision / recall / f1
    std: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "tolerance_frames": self.tolerance_frames,
            "per_seed": {str(s): v for s, v in self.per_seed.items()},
            "mean": self.mean,
            "std": self.std,
        }


def boundary_report(results: Mapping[int, Sequence[MatchCounts]], tolerance: int) -> BoundaryEvalReport:
    """Micro-average utterances within each seed, then mean and (population)
    standard deviation across seeds."""
    if not results or any(len(v) == 0 for v in results.values()):
        raise ValueError("need at least one utterance per seed")
    per_seed = {}
    for seed, items in results.items():
        total = sum(items, MatchCounts(0, 0, 0))
        p, r, f = prf(total)
        per_seed[seed] = {"tp": total.tp, "fp": total.fp, "fn": total.fn,
                          "precision": p, "recall": r, "f1": f}
    mean, std = {}, {}
    for key in ("precision", "recall", "f1"):
        vals = np.array([v[key] for v in per_seed.values()])
        mean[key] = float(vals.mean())
        std[key] = float(vals.std())
    return BoundaryEvalReport(tolerance, per_seed, mean, std)


class LabelMismatchError(ValueError):
    pass


def confusion_counts(predictions, truths, labels: Sequence[str]) -> np.ndarray:
    if len(predictions) != len(truths):
        raise LabelMismatchError(
            f"{len(predictions)} predictions vs {len(truths)} reference labels")
    index = {lab: i for i, lab in enumerate(labels)}
    cm = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for p, t in zip(predictions, truths):
        cm[index[t], index[p]] += 1
    return cm


def row_normalise(cm: np.ndarray) -> np.ndarray:
    cm = np.asarray(cm, dtype=np.float64)
    sums = cm.sum(axis=1, keepdims=True)
    return np.divide(cm, sums, out=np.zeros_like(cm), where=sums > 0)


def classification_report(predictions, truths, labels: Sequence[str] | None = None) -> dict:
    """Accuracy, per-class precision/recall/F1, confusion counts and chance level."""
    if labels is None:
        labels = sorted(set(truths) | set(predictions))
    labels = list(labels)
    cm = confusion_counts(predictions, truths, labels)
    total = int(cm.sum())
    per_class = {}
    for i, lab in enumerate(labels):
        tp = int(cm[i, i])
        p, r, f = prf(MatchCounts(tp, int(cm[:, i].sum()) - tp, int(cm[i].sum()) - tp))
        per_class[lab] = {"precision": p, "recall": r, "f1": f, "support": int(cm[i].sum())}
    return {
        "n_samples": total,
        "n_classes": len(labels),
        "accuracy": float(np.trace(cm) / total) if total else 0.0,
        "chance": 1.0 / len(labels),
        "labels": labels,
        "per_class": per_class,
        "confusion": cm.tolist(),
        "confusion_normalised": row_normalise(cm).tolist(),
    }


def write_confusion_csv(path, cm, labels: Sequence[str]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["true\\pred"] + list(labels))
        for lab, row in zip(labels, np.asarray(cm)):
            w.writerow([lab] + [int(v) if float(v).is_integer() else repr(float(v)) for v in row])
