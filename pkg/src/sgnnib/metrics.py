"""Imbalance-aware evaluation: rank AUC, recall, GMean, and macro F1.

AUC uses the rank (Mann-Whitney) formulation with ties counting one half,
computed from integer-valued numerators so it agrees exactly with the
brute-force all-pairs definition. Thresholded metrics use 0.5 on the
fraud-class probability. GMean is sqrt(TPR * TNR), the standard form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricsError(ValueError):
    """Raised when a metric is undefined for the given labels."""


@dataclass
class MetricsReport:
    """One evaluation: ranking metric, thresholded rates, and raw counts.

    recall is the fraud-class recall; recall_macro (the unweighted mean of
    the two per-class recalls) is emitted alongside it.
    """

    auc: float
    recall: float
    f1_macro: float
    gmean: float
    recall_macro: float
    confusion: tuple[int, int, int, int]  # (TP, FP, TN, FN)

    def to_dict(self) -> dict:
        return {
            "recall": self.recall,
            "f1_macro": self.f1_macro,
            "auc": self.auc,
            "gmean": self.gmean,
            "recall_macro": self.recall_macro,
            "confusion": {"tp": self.confusion[0], "fp": self.confusion[1],
                          "tn": self.confusion[2], "fn": self.confusion[3]},
        }


def _check_scores_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    if scores.shape != labels.shape:
        raise MetricsError(
            f"scores and labels lengths differ: {scores.shape} vs {labels.shape}")
    if not np.isin(labels, (0, 1)).all():
        raise MetricsError("labels must be 0 or 1")
    return scores, labels


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks with ties averaged; tie groups found by exact equality."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i + 1
        while j < len(scores) and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + 1 + j)
        i = j
    return ranks


def auc(scores, labels) -> float:
    """Probability that a random fraud node outranks a random benign node,
    ties counting one half."""
    scores, labels = _check_scores_labels(scores, labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricsError("AUC needs both classes present")
    ranks = _average_ranks(scores)
    # 2 * rank sums are integers, so the numerator below is exact
    numerator = round(2.0 * ranks[labels == 1].sum()) - n_pos * (n_pos + 1)
    return numerator / (2 * n_pos * n_neg)


def confusion_and_rates(scores, labels, threshold: float = 0.5):
    """Counts and guarded rates at the given fraud-probability threshold."""
    scores, labels = _check_scores_labels(scores, labels)
    pred = scores >= threshold
    tp = int((pred & (labels == 1)).sum())
    fp = int((pred & (labels == 0)).sum())
    tn = int((~pred & (labels == 0)).sum())
    fn = int((~pred & (labels == 1)).sum())

    def rate(num, den):
        return num / den if den else 0.0

    tpr = rate(tp, tp + fn)
    tnr = rate(tn, tn + fp)
    fpr = rate(fp, fp + tn)
    return tp, fp, tn, fn, tpr, tnr, fpr


def gmean(tpr: float, tnr: float) -> float:
    """Geometric mean of the two class-conditional recalls."""
    return float(np.sqrt(tpr * tnr))


def f1_macro(tp: int, fp: int, tn: int, fn: int) -> float:
    """Unweighted mean of per-class F1 scores (fraud and benign)."""

    def f1(tp_c, fp_c, fn_c):
        denom = 2 * tp_c + fp_c + fn_c
        return 2 * tp_c / denom if denom else 0.0

    return 0.5 * (f1(tp, fp, fn) + f1(tn, fn, fp))


def evaluate_scores(scores, labels, threshold: float = 0.5) -> MetricsReport:
    """Full report from fraud probabilities and binary labels."""
    auc_val = auc(scores, labels)
    tp, fp, tn, fn, tpr, tnr, _ = confusion_and_rates(scores, labels, threshold)
    return MetricsReport(
        auc=auc_val,
        recall=tpr,
        f1_macro=f1_macro(tp, fp, tn, fn),
        gmean=gmean(tpr, tnr),
        recall_macro=0.5 * (tpr + tnr),
        confusion=(tp, fp, tn, fn),
    )
