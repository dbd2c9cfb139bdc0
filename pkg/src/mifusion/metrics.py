"""Evaluation metrics for continuous sentiment predictions in [-3, 3]:
MAE, Pearson correlation, seven-interval accuracy, and binary accuracy/F1
under both zero-label conventions.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyAfterExclusion, ZeroVariance


@dataclass
class MetricReport:
    mae: float
    corr: float
    acc7: float
    acc2_nonneg: float
    acc2_pos: float
    f1_nonneg: float
    f1_pos: float

    def as_dict(self):
        return {
            "mae": self.mae,
            "corr": self.corr,
            "acc7": self.acc7,
            "acc2_nonneg": self.acc2_nonneg,
            "acc2_pos": self.acc2_pos,
            "f1_nonneg": self.f1_nonneg,
            "f1_pos": self.f1_pos,
        }


def bin7(value: float) -> int:
    """Clamp to [-3, 3], then round to the nearest integer, ties away from zero."""
    v = min(3.0, max(-3.0, float(value)))
    if v >= 0:
        return int(math.floor(v + 0.5))
    return int(math.ceil(v - 0.5))


def _binary_f1(pred_pos, truth_pos) -> float:
    """F1 of the positive class; 0 when precision + recall is 0."""
    tp = int(np.sum(pred_pos & truth_pos))
    fp = int(np.sum(pred_pos & ~truth_pos))
    fn = int(np.sum(~pred_pos & truth_pos))
    if 2 * tp + fp + fn == 0:
        return 0.0
    return 2.0 * tp / (2 * tp + fp + fn)


def compute_metrics(preds, truths) -> MetricReport:
    """Full metric suite over aligned prediction/truth vectors.

    The non-negative convention classifies every sample by value >= 0; the
    positive convention drops samples whose truth is exactly 0 and
    classifies by value > 0. Correlation on a constant vector raises
    ZeroVariance rather than returning NaN.
    """
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    truths = np.asarray(truths, dtype=np.float64).reshape(-1)
    if preds.shape != truths.shape or preds.size == 0:
        raise ValueError("predictions and truths must be equal-length and nonempty")

    mae = float(np.mean(np.abs(preds - truths)))

    keep = truths != 0
    if not np.any(keep):
        raise EmptyAfterExclusion("no samples remain after excluding zero truths")

    pc = preds - preds.mean()
    tc = truths - truths.mean()
    denom = np.sqrt(np.sum(pc * pc) * np.sum(tc * tc))
    if denom == 0.0:
        raise ZeroVariance("correlation undefined for a constant vector")
    corr = float(np.sum(pc * tc) / denom)

    pred_bins = np.array([bin7(v) for v in preds])
    truth_bins = np.array([bin7(v) for v in truths])
    acc7 = float(np.mean(pred_bins == truth_bins))

    pred_nonneg = preds >= 0
    truth_nonneg = truths >= 0
    acc2_nonneg = float(np.mean(pred_nonneg == truth_nonneg))
    f1_nonneg = _binary_f1(pred_nonneg, truth_nonneg)

    pred_pos = preds[keep] > 0
    truth_pos = truths[keep] > 0
    acc2_pos = float(np.mean(pred_pos == truth_pos))
    f1_pos = _binary_f1(pred_pos, truth_pos)

    return MetricReport(
        mae=mae,
        corr=corr,
        acc7=acc7,
        acc2_nonneg=acc2_nonneg,
        acc2_pos=acc2_pos,
        f1_nonneg=f1_nonneg,
        f1_pos=f1_pos,
    )
