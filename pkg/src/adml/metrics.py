"""Classification metrics: confusion counts, accuracies, and rank-based AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, SingleClassTruth


@dataclass(frozen=True)
class MetricsRecord:
    tp: int
    fn: int
    tn: int
    fp: int
    accuracy: float
    balanced_accuracy: float
    sensitivity: float
    specificity: float
    auc: float

    FIELDS = ("accuracy", "balanced_accuracy", "sensitivity", "specificity", "auc")


def _midranks(values):
    v = np.asarray(values, dtype=np.float64)
    order = np.argsort(v, kind="mergesort")
    ranks = np.empty(v.size, dtype=np.float64)
    i = 0
    sv = v[order]
    while i < v.size:
        j = i
        while j + 1 < v.size and sv[j + 1] == sv[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def auc_from_scores(true_labels, scores) -> float:
    """Mann-Whitney AUC with midrank tie handling; +1 is the positive class."""
    y = np.asarray(true_labels)
    s = np.asarray(scores, dtype=np.float64)
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassTruth("AUC undefined with a single true class")
    ranks = _midranks(s)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def compute_metrics(true_labels, predicted_labels, scores) -> MetricsRecord:
    y = np.asarray(true_labels)
    yhat = np.asarray(predicted_labels)
    s = np.asarray(scores, dtype=np.float64)
    if not (y.size == yhat.size == s.size):
        raise LengthMismatch(
            f"lengths differ: {y.size}, {yhat.size}, {s.size}")
    if not np.all(np.isin(y, (-1, 1))) or not np.all(np.isin(yhat, (-1, 1))):
        raise ValueError("labels must be -1 or +1")
    tp = int(np.sum((y == 1) & (yhat == 1)))
    fn = int(np.sum((y == 1) & (yhat == -1)))
    tn = int(np.sum((y == -1) & (yhat == -1)))
    fp = int(np.sum((y == -1) & (yhat == 1)))
    if tp + fn == 0 or tn + fp == 0:
        raise SingleClassTruth("sensitivity/specificity undefined with one class")
    sensitivity = tp / (tp + fn)
    specificity = tn / (tn + fp)
    return MetricsRecord(
        tp=tp, fn=fn, tn=tn, fp=fp,
        accuracy=(tp + tn) / (tp + tn + fp + fn),
        balanced_accuracy=0.5 * (sensitivity + specificity),
        sensitivity=sensitivity,
        specificity=specificity,
        auc=auc_from_scores(y, s),
    )
