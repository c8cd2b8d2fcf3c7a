"""Confusion matrices, classification metrics and occlusion sensitivity."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .datakit import WindowSet
from .detectors import FEATURES


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int
    positive: str = "hacked"

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
                "positive": self.positive}


def confusion(preds, labels, positive=1, name: str = "hacked") -> ConfusionMatrix:
    """Counts with ``positive`` as the positive label value."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.shape != labels.shape:
        raise ValueError(f"{len(preds)} predictions for {len(labels)} labels")
    if len(preds) == 0:
        raise ValueError("nothing to evaluate")
    p = preds == positive
    t = labels == positive
    return ConfusionMatrix(int(np.sum(p & t)), int(np.sum(p & ~t)),
                           int(np.sum(~p & t)), int(np.sum(~p & ~t)), name)


@dataclass
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    averaging: str = "binary"
    zero_division: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "averaging": self.averaging, "zero_division": list(self.zero_division)}


def _ratio(num, den, flag, flags):
    if den == 0:
        flags.append(flag)
        return 0.0
    return num / den


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Binary metrics on the positive class; 0/0 ratios become 0 and are flagged."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    flags: list = []
    precision = _ratio(cm.tp, cm.tp + cm.fp, "precision", flags)
    recall = _ratio(cm.tp, cm.tp + cm.fn, "recall", flags)
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return MetricsReport((cm.tp + cm.tn) / cm.total, precision, recall, f1, "binary", flags)


def weighted_metrics(preds, labels) -> tuple[MetricsReport, dict]:
    """Support-weighted average of per-class metrics; also returns the supports."""
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    supports = {}
    acc = float(np.mean(preds == labels))
    p = r = f = 0.0
    flags = []
    for cls in np.unique(labels):
        m = metrics(confusion(preds, labels, cls, str(cls)))
        w = int(np.sum(labels == cls))
        supports[int(cls)] = w
        p += w * m.precision
        r += w * m.recall
        f += w * m.f1
        flags += [f"{cls}:{z}" for z in m.zero_division]
    n = len(labels)
    return MetricsReport(acc, p / n, r / n, f / n, "weighted", flags), supports


@dataclass
class OcclusionEntry:
    feature: str
    baseline: float
    occluded: float

    @property
    def drop(self) -> float:
        return self.baseline - self.occluded


@dataclass
class OcclusionReport:
    entries: list

    def ranking(self) -> list[str]:
        return [e.feature for e in self.entries]

    def top(self, n: int) -> list[str]:
        return self.ranking()[:n]


def occlusion_sensitivity(model, test, train_means, predict_fn=None,
                          names=FEATURES) -> OcclusionReport:
    """Accuracy drop when each feature is replaced by its training mean.

    ``test`` is a Dataset (tabular) or WindowSet (CNN; the raw channel's
    column is occluded in every row). Sorted by drop, largest first, with
    ties in feature order. Neither the model nor ``test`` is modified.
    """
    if predict_fn is None:
        from .models import predict as predict_fn
    train_means = np.asarray(train_means, dtype=float)
    X = test.X
    width = X.shape[-1]
    if width != len(names) or len(train_means) != len(names):
        raise ValueError(f"schema mismatch: {width} test columns, {len(train_means)} means, "
                         f"{len(names)} names")
    y = test.y

    def accuracy(data):
        return float(np.mean(predict_fn(model, data).labels == y))

    baseline = accuracy(X)
    entries = []
    for j, name in enumerate(names):
        Xo = X.copy()
        if isinstance(test, WindowSet):
            Xo[:, 0, :, j] = train_means[j]
        else:
            Xo[:, j] = train_means[j]
        entries.append(OcclusionEntry(name, baseline, accuracy(Xo)))
    order = sorted(range(len(entries)), key=lambda i: (-round(entries[i].drop, 12), i))
    return OcclusionReport([entries[i] for i in order])


def write_occlusion_csv(reports: dict, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "rank", "feature", "baseline", "occluded", "drop"])
        for model, rep in reports.items():
            for rank, e in enumerate(rep.entries, 1):
                w.writerow([model, rank, e.feature, f"{e.baseline:.6f}", f"{e.occluded:.6f}", f"{e.drop:.6f}"])


def write_confusion_csv(cms: dict, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["model", "positive", "tp", "fp", "fn", "tn"])
        for model, cm in cms.items():
            w.writerow([model, cm.positive, cm.tp, cm.fp, cm.fn, cm.tn])

