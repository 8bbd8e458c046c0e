"""Per-frame average precision and anticipation mAP."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..numerics import softmax_rows

log = logging.getLogger(__name__)


def average_precision(scores, positives) -> float:
    """Mean of precision@k over the ranks k of the positives.

    Frames are ranked by descending score; equal scores keep frame order.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    if n_pos == 0:
        raise ValueError("average precision needs at least one positive")
    order = np.argsort(-scores, kind="stable")
    hits = positives[order]
    ranks = np.flatnonzero(hits) + 1
    return float((np.arange(1, n_pos + 1) / ranks).mean())


def per_class_ap(scores, labels, classes) -> dict:
    """AP of column ``c`` of ``scores`` against ``labels == c`` for each class with positives."""
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    out = {}
    for c in classes:
        pos = labels == c
        if not pos.any():
            log.info("class %d has no positive frames; skipped", c)
            continue
        out[int(c)] = average_precision(scores[:, c], pos)
    return out


@dataclass
class MetricReport:
    per_class: dict = field(default_factory=dict)
    horizons: dict = field(default_factory=dict)

    @property
    def mAP(self) -> float:
        return float(np.mean(list(self.per_class.values()))) if self.per_class else float("nan")

    def to_dict(self) -> dict:
        return {
            "mAP": self.mAP,
            "per_class_ap": {str(k): v for k, v in self.per_class.items()},
            "anticipation_mAP": {str(k): v for k, v in self.horizons.items()},
        }


def anticipation_map(outputs, labels, horizon: int, classes=None) -> tuple[float, dict]:
    """mAP of the horizon-``horizon`` score row against labels shifted by ``horizon``.

    ``outputs`` is ``(T, 1 + L_a, K + 1)``: row 0 scores the current frame,
    row h the frame h steps ahead. Horizon 0 is per-frame detection. By
    default the background class 0 is excluded from the mean.
    """
    outputs = np.asarray(outputs, dtype=np.float64)
    labels = np.asarray(labels)
    T, rows, n_cls = outputs.shape
    if horizon < 0 or horizon > rows - 1:
        raise ConfigError(f"horizon {horizon} exceeds the {rows - 1} anticipation rows")
    if classes is None:
        classes = range(1, n_cls)
    scores = outputs[: T - horizon, horizon]
    shifted = labels[horizon:T]
    aps = per_class_ap(scores, shifted, classes)
    return (float(np.mean(list(aps.values()))) if aps else float("nan")), aps


def probabilities(logits) -> np.ndarray:
    return softmax_rows(logits)


def evaluate_outputs(logits, labels, horizons=(0,)) -> MetricReport:
    """Detection AP per class plus anticipation mAP for each horizon, from stream logits."""
    probs = probabilities(logits)
    report = MetricReport()
    _, report.per_class = anticipation_map(probs, labels, 0)
    for h in horizons:
        report.horizons[int(h)] = anticipation_map(probs, labels, int(h))[0]
    return report
