"""Binary-classification evaluation: confusion matrix, threshold metrics,
ROC/PR curves with trapezoidal AUC, and stratified k-fold splitting."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


def confusion(y_true, y_pred) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred length mismatch")
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    return ConfusionMatrix(tp, fp, tn, fn)


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float      # TPR
    fpr: float
    f1: float
    # names of metrics whose denominator was zero (reported as 0)
    degenerate: frozenset[str] = frozenset()

    def to_dict(self) -> dict:
        return {"accuracy": self.accuracy, "precision": self.precision,
                "recall": self.recall, "fpr": self.fpr, "f1": self.f1,
                "degenerate": sorted(self.degenerate)}


def metrics(cm: ConfusionMatrix) -> Metrics:
    degenerate = set()

    def ratio(name, num, den):
        if den == 0:
            degenerate.add(name)
            return 0.0
        return num / den

    accuracy = ratio("accuracy", cm.tp + cm.tn, cm.total)
    precision = ratio("precision", cm.tp, cm.tp + cm.fp)
    recall = ratio("recall", cm.tp, cm.tp + cm.fn)
    fpr = ratio("fpr", cm.fp, cm.fp + cm.tn)
    f1 = ratio("f1", 2 * precision * recall, precision + recall)
    return Metrics(accuracy, precision, recall, fpr, f1,
                   frozenset(degenerate))


def _sorted_score_groups(y_true, scores):
    y_true = np.asarray(y_true, dtype=int)
    scores = np.asarray(scores, dtype=float)
    if y_true.shape != scores.shape:
        raise ValueError("y_true and scores length mismatch")
    order = np.argsort(-scores, kind="stable")
    return y_true[order], scores[order]


def roc_curve(y_true, scores) -> tuple[list[tuple[float, float, float]], float]:
    """ROC points swept over distinct scores (descending), tied scores
    collapsed into one step.  Returns ([(threshold, fpr, tpr)...], auc)
    with AUC by the trapezoidal rule."""
    ys, ss = _sorted_score_groups(y_true, scores)
    n_pos = int(ys.sum())
    n_neg = ys.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC/AUC needs both classes present")
    points = [(float("inf"), 0.0, 0.0)]
    tp = fp = 0
    i = 0
    n = ys.shape[0]
    while i < n:
        thr = ss[i]
        while i < n and ss[i] == thr:
            tp += int(ys[i] == 1)
            fp += int(ys[i] == 0)
            i += 1
        points.append((float(thr), fp / n_neg, tp / n_pos))
    auc = 0.0
    for (_, x0, y0), (_, x1, y1) in zip(points[:-1], points[1:]):
        auc += (x1 - x0) * (y0 + y1) / 2.0
    return points, float(auc)


def pr_curve(y_true, scores) -> list[tuple[float, float, float]]:
    """Precision-recall points: [(threshold, recall, precision)...]."""
    ys, ss = _sorted_score_groups(y_true, scores)
    n_pos = int(ys.sum())
    if n_pos == 0:
        raise ValueError("PR curve needs at least one positive sample")
    points = [(float("inf"), 0.0, 1.0)]
    tp = fp = 0
    i = 0
    n = ys.shape[0]
    while i < n:
        thr = ss[i]
        while i < n and ss[i] == thr:
            tp += int(ys[i] == 1)
            fp += int(ys[i] == 0)
            i += 1
        points.append((float(thr), tp / n_pos, tp / (tp + fp)))
    return points


@dataclass
class EvalReport:
    cm: ConfusionMatrix
    metrics: Metrics
    roc_points: list[tuple[float, float, float]] = field(default_factory=list)
    pr_points: list[tuple[float, float, float]] = field(default_factory=list)
    auc: float | None = None

    def to_dict(self) -> dict:
        return {
            "confusion": {"tp": self.cm.tp, "fp": self.cm.fp,
                          "tn": self.cm.tn, "fn": self.cm.fn},
            "metrics": self.metrics.to_dict(),
            "auc": self.auc,
            "roc_points": [list(p) for p in self.roc_points],
            "pr_points": [list(p) for p in self.pr_points],
        }


def evaluate(y_true, scores, threshold: float = 0.5) -> EvalReport:
    """Full evaluation of probability scores against 0/1 labels.

    Curves/AUC are included when both classes are present; otherwise the
    threshold metrics alone are reported.
    """
    y_true = np.asarray(y_true, dtype=int)
    scores = np.asarray(scores, dtype=float)
    y_pred = (scores >= threshold).astype(int)
    cm = confusion(y_true, y_pred)
    report = EvalReport(cm, metrics(cm))
    if 0 < int(y_true.sum()) < y_true.shape[0]:
        report.roc_points, report.auc = roc_curve(y_true, scores)
        report.pr_points = pr_curve(y_true, scores)
    return report


def stratified_kfold(y, k: int, seed: int) -> list[np.ndarray]:
    """k disjoint index folds whose per-class counts differ from the exact
    proportion by at most one sample.  Deterministic given the seed."""
    y = np.asarray(y)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in sorted(np.unique(y).tolist()):
        idx = np.flatnonzero(y == cls)
        if idx.shape[0] < k:
            raise ValueError(f"class {cls} has fewer than k={k} members")
        idx = idx[rng.permutation(idx.shape[0])]
        for j, sample in enumerate(idx):
            folds[j % k].append(int(sample))
    return [np.sort(np.array(f, dtype=int)) for f in folds]
