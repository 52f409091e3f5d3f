"""Binary-classification metrics: AUROC, threshold metrics, ROC curves.

AUROC uses the rank form (probability a random positive outscores a random
negative, ties counting one half), which coincides exactly with the
trapezoidal area under the ROC curve produced by `roc_points`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = ["ScoredSet", "ConfusionMetrics", "RocCurve",
           "auroc", "confusion_metrics", "roc_points",
           "write_roc_csv", "write_roc_svg"]


@dataclass(frozen=True)
class ScoredSet:
    """Per-sample class-1 probabilities in [0, 1] with {0,1} labels."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        if scores.ndim != 1 or labels.ndim != 1 or scores.size != labels.size:
            raise ValueError("scores and labels must be 1-D and the same length")
        if scores.size < 1:
            raise ValueError("need at least one sample")
        if not np.isfinite(scores).all() or scores.min() < 0.0 or scores.max() > 1.0:
            raise ValueError("scores must lie in [0, 1]")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")

    @property
    def n_positive(self) -> int:
        return int((self.labels == 1).sum())

    @property
    def n_negative(self) -> int:
        return int((self.labels == 0).sum())


def _require_both_classes(s: ScoredSet, what: str) -> None:
    if s.n_positive == 0 or s.n_negative == 0:
        raise ValueError(f"{what} needs at least one sample of each class")


def _tied_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the average of their rank range."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auroc(s: ScoredSet) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) + P(equal)/2."""
    _require_both_classes(s, "auroc")
    ranks = _tied_ranks(s.scores)
    n_pos, n_neg = s.n_positive, s.n_negative
    pos_rank_sum = float(ranks[s.labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


@dataclass(frozen=True)
class ConfusionMetrics:
    accuracy: float
    sensitivity: float | None  # None when no positives exist
    specificity: float | None  # None when no negatives exist
    tp: int
    tn: int
    fp: int
    fn: int


def confusion_metrics(s: ScoredSet, threshold: float = 0.5) -> ConfusionMetrics:
    """Counts at a fixed threshold; a sample is predicted positive iff
    its score is >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    predicted = s.scores >= threshold
    actual = s.labels == 1
    tp = int((predicted & actual).sum())
    tn = int((~predicted & ~actual).sum())
    fp = int((predicted & ~actual).sum())
    fn = int((~predicted & actual).sum())
    n_pos, n_neg = tp + fn, tn + fp
    return ConfusionMetrics(
        accuracy=(tp + tn) / s.scores.size,
        sensitivity=tp / n_pos if n_pos else None,
        specificity=tn / n_neg if n_neg else None,
        tp=tp, tn=tn, fp=fp, fn=fn,
    )


@dataclass(frozen=True)
class RocCurve:
    """Operating points (threshold, fpr, tpr), threshold descending.

    The first point is the predict-nothing sentinel (inf, 0, 0); the last
    always reaches (1, 1). Both rates are non-decreasing along the curve.
    """

    points: tuple[tuple[float, float, float], ...]

    def area(self) -> float:
        total = 0.0
        for (_, fpr0, tpr0), (_, fpr1, tpr1) in zip(self.points, self.points[1:]):
            total += (fpr1 - fpr0) * (tpr1 + tpr0) / 2.0
        return total


def roc_points(s: ScoredSet) -> RocCurve:
    """One point per distinct score (predict positive iff score >= t)."""
    _require_both_classes(s, "roc_points")
    order = np.argsort(-s.scores, kind="mergesort")
    scores = s.scores[order]
    labels = s.labels[order]
    n_pos, n_neg = s.n_positive, s.n_negative

    points = [(float("inf"), 0.0, 0.0)]
    tp = fp = 0
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and scores[j + 1] == scores[i]:
            j += 1
        tp += int((labels[i:j + 1] == 1).sum())
        fp += int((labels[i:j + 1] == 0).sum())
        points.append((float(scores[i]), fp / n_neg, tp / n_pos))
        i = j + 1
    return RocCurve(points=tuple(points))


# ---------------------------------------------------------------------------
# emission


def write_roc_csv(path, curve: RocCurve) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for thr, fpr, tpr in curve.points:
            writer.writerow([repr(float(thr)), repr(float(fpr)), repr(float(tpr))])


_SVG_COLORS = ("#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400",
               "#16a085", "#7f8c8d", "#2c3e50")


def write_roc_svg(path, curves: dict[str, RocCurve], size: int = 480) -> None:
    """Standalone SVG: unit axes with ticks, one polyline per named curve."""
    margin = 56
    span = size - 2 * margin

    def x(fpr: float) -> float:
        return margin + fpr * span

    def y(tpr: float) -> float:
        return size - margin - tpr * span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="{x(0)}" y1="{y(0)}" x2="{x(1)}" y2="{y(0)}" stroke="black"/>',
        f'<line x1="{x(0)}" y1="{y(0)}" x2="{x(0)}" y2="{y(1)}" stroke="black"/>',
        f'<line x1="{x(0)}" y1="{y(0)}" x2="{x(1)}" y2="{y(1)}" '
        f'stroke="#999" stroke-dasharray="6,4"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(f'<line x1="{x(tick)}" y1="{y(0)}" x2="{x(tick)}" y2="{y(0) + 5}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{x(tick)}" y="{y(0) + 20}" font-size="11" '
                     f'text-anchor="middle">{tick:g}</text>')
        parts.append(f'<line x1="{x(0) - 5}" y1="{y(tick)}" x2="{x(0)}" y2="{y(tick)}" '
                     f'stroke="black"/>')
        parts.append(f'<text x="{x(0) - 9}" y="{y(tick) + 4}" font-size="11" '
                     f'text-anchor="end">{tick:g}</text>')
    parts.append(f'<text x="{x(0.5)}" y="{size - 12}" font-size="13" '
                 f'text-anchor="middle">False positive rate</text>')
    parts.append(f'<text x="16" y="{y(0.5)}" font-size="13" text-anchor="middle" '
                 f'transform="rotate(-90 16 {y(0.5)})">True positive rate</text>')

    for idx, (name, curve) in enumerate(curves.items()):
        color = _SVG_COLORS[idx % len(_SVG_COLORS)]
        coords = " ".join(f"{x(fpr):.2f},{y(tpr):.2f}" for _, fpr, tpr in curve.points)
        parts.append(f'<polyline points="{coords}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{x(0.62)}" y="{y(0.05) - 16 * idx}" font-size="11" '
                     f'fill="{color}">{name} (AUROC {curve.area():.3f})</text>')
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
