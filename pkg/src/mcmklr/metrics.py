"""Classification metrics: accuracy, ROC-AUC, Macro-F1, multiclass MCC."""

from dataclasses import dataclass

import numpy as np
import scipy.stats

from .errors import DimensionError, UndefinedMetricError, ValidationError


@dataclass
class ConfusionMatrix:
    """Counts with rows = true class, columns = predicted class."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValidationError(f"confusion matrix must be square, got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValidationError("confusion matrix entries must be nonnegative")

    @property
    def n_classes(self):
        return self.counts.shape[0]

    @property
    def total(self):
        return int(self.counts.sum())


def confusion_matrix(y_true, y_pred, n_classes=None):
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if len(y_true) != len(y_pred):
        raise DimensionError(f"{len(y_true)} labels vs {len(y_pred)} predictions")
    if n_classes is None:
        n_classes = int(max(y_true.max(), y_pred.max())) + 1
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)


def accuracy(y_true, y_pred):
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if len(y_true) != len(y_pred):
        raise DimensionError(f"{len(y_true)} labels vs {len(y_pred)} predictions")
    if len(y_true) == 0:
        raise ValidationError("accuracy needs at least one sample")
    return float(np.mean(y_true == y_pred))


def roc_auc(y_true, scores):
    """Rank AUC: P(score_pos > score_neg) + 0.5 P(tie), via midranks."""
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    if len(y_true) != len(scores):
        raise DimensionError(f"{len(y_true)} labels vs {len(scores)} scores")
    pos = y_true == 1
    n_pos = int(pos.sum())
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC-AUC needs both classes present")
    ranks = scipy.stats.rankdata(scores)  # average rank on ties = midrank
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_f1(cm):
    """Mean per-class F1; a class with P + R = 0 contributes 0."""
    c = cm.counts
    if cm.n_classes < 2:
        raise ValidationError("macro-F1 needs >= 2 classes")
    tp = np.diag(c).astype(float)
    pred = c.sum(axis=0).astype(float)
    true = c.sum(axis=1).astype(float)
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(pred > 0, tp / pred, 0.0)
        rec = np.where(true > 0, tp / true, 0.0)
        pr = prec + rec
        f1 = np.where(pr > 0, 2.0 * prec * rec / np.where(pr > 0, pr, 1.0), 0.0)
    return float(f1.mean())


def mcc(cm):
    """Multiclass Matthews correlation (the R_K statistic).

    (c*s - sum_k p_k t_k) / sqrt((s^2 - sum p_k^2)(s^2 - sum t_k^2))
    with c = trace, s = total, t = row sums, p = column sums; 0 when
    either denominator factor vanishes.
    """
    if cm.n_classes < 2:
        raise ValidationError("MCC needs >= 2 classes")
    m = cm.counts.astype(np.float64)
    c = np.trace(m)
    s = m.sum()
    t = m.sum(axis=1)
    p = m.sum(axis=0)
    cov = c * s - p @ t
    f1 = s * s - p @ p
    f2 = s * s - t @ t
    if f1 <= 0 or f2 <= 0:
        return 0.0
    return float(cov / np.sqrt(f1 * f2))
