"""Classification metrics at threshold 0 and rank-statistic AUC."""
from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

METRIC_NAMES = ("f1", "auc", "tpr", "tnr")


@dataclass(frozen=True)
class MetricsReport:
    f1: float
    auc: float
    tpr: float
    tnr: float
    tp: int
    fp: int
    fn: int
    tn: int

    def as_dict(self) -> dict:
        return asdict(self)


def rank_auc(scores, labels) -> float:
    """P(random positive outranks random negative), ties counted 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels) == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined: ground truth has a single class")
    ranks = rankdata(scores)  # average ranks resolve ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pairwise_auc(scores, labels) -> float:
    """O(P*N) reference: average over all positive/negative pairs."""
    scores = np.asarray(scores, dtype=np.float64)
    pos = np.asarray(labels) == 1
    sp, sn = scores[pos], scores[~pos]
    if len(sp) == 0 or len(sn) == 0:
        raise ValueError("AUC undefined: ground truth has a single class")
    diff = sp[:, None] - sn[None, :]
    return float(((diff > 0).sum() + 0.5 * (diff == 0).sum()) / diff.size)


def confusion(pred, labels) -> tuple[int, int, int, int]:
    pred = np.asarray(pred) == 1
    pos = np.asarray(labels) == 1
    tp = int(np.sum(pred & pos))
    fp = int(np.sum(pred & ~pos))
    fn = int(np.sum(~pred & pos))
    tn = int(np.sum(~pred & ~pos))
    return tp, fp, fn, tn


def f1_from_counts(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    if denom == 0:
        warnings.warn("F1 undefined (no predicted and no actual positives); reporting 0", RuntimeWarning)
        return 0.0
    return 2 * tp / denom


def compute_metrics(scores, true_labels) -> MetricsReport:
    """Scores are predictions in [-1, 1]; labels are +1 / -1.  Predict +1 iff score > 0."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(true_labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same shape")
    pred = np.where(scores > 0, 1, -1)
    tp, fp, fn, tn = confusion(pred, labels)
    auc = rank_auc(scores, labels)
    return MetricsReport(
        f1=f1_from_counts(tp, fp, fn),
        auc=auc,
        tpr=tp / (tp + fn),
        tnr=tn / (tn + fp),
        tp=tp, fp=fp, fn=fn, tn=tn,
    )


def f1_score(scores, true_labels) -> float:
    pred = np.where(np.asarray(scores) > 0, 1, -1)
    tp, fp, fn, _ = confusion(pred, true_labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return f1_from_counts(tp, fp, fn)
