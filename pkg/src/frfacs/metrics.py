"""Imbalance-aware evaluation metrics.

Every 0/0 rate is defined as 0, and MCC is 0 when its denominator
vanishes, so degenerate predictors still yield finite reports.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import UnsupportedMetricError


def _div(a: float, b: float) -> float:
    return float(a) / float(b) if b else 0.0


def confusion(y_true, y_pred, n_classes: int) -> np.ndarray:
    """K x K counts, rows = true class, columns = predicted class."""
    t = np.asarray(y_true, dtype=np.int64).ravel()
    p = np.asarray(y_pred, dtype=np.int64).ravel()
    if t.size != p.size:
        raise ValueError("y_true and y_pred differ in length")
    for arr in (t, p):
        if arr.size and (arr.min() < 0 or arr.max() >= n_classes):
            raise ValueError(f"labels must lie in 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (t, p), 1)
    return cm


def auprc(y_true, y_score) -> float:
    """Step-interpolated area under the precision-recall curve.

    Samples are ranked by descending score (ties by index) and the area is
    sum(precision_i * (recall_i - recall_{i-1})) over the ranking.
    """
    y = np.asarray(y_true).ravel().astype(bool)
    s = np.asarray(y_score, dtype=float).ravel()
    if y.size != s.size:
        raise ValueError("y_true and y_score differ in length")
    n_pos = int(y.sum())
    if n_pos == 0:
        raise ValueError("AUPRC undefined without positive samples")
    order = np.argsort(-s, kind="stable")
    hits = y[order]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, y.size + 1)
    return float(np.sum(precision[hits]) / n_pos)


def mcc_binary(tp, fp, fn, tn) -> float:
    denom = np.sqrt(float(tp + fp) * float(tp + fn) * float(tn + fp) * float(tn + fn))
    if denom == 0:
        return 0.0
    return float((tp * tn - fp * fn) / denom)


def mcc_multiclass(cm: np.ndarray) -> float:
    cm = np.asarray(cm, dtype=float)
    t = cm.sum(axis=1)
    p = cm.sum(axis=0)
    c = np.trace(cm)
    s = cm.sum()
    denom = np.sqrt((s * s - p @ p) * (s * s - t @ t))
    return float((c * s - t @ p) / denom) if denom else 0.0


@dataclass
class MetricReport:
    macro_f1: float
    minority_f1: float
    balanced_accuracy: float
    mcc: float
    precision: list
    recall: list
    minority_class: int
    g_mean: Optional[float] = None
    auprc: Optional[float] = None
    type_i_rate: Optional[float] = None
    type_ii_rate: Optional[float] = None
    n: int = 0

    SCALARS = ("macro_f1", "minority_f1", "balanced_accuracy", "g_mean", "auprc", "mcc", "type_i_rate", "type_ii_rate")

    def scalars(self) -> dict:
        return {k: getattr(self, k) for k in self.SCALARS if getattr(self, k) is not None}

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_rows(self, **keys) -> list:
        return [dict(keys, metric=k, value=v) for k, v in self.scalars().items()]

    def to_csv(self, **keys) -> str:
        rows = self.csv_rows(**keys)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(keys) + ["metric", "value"], lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        return buf.getvalue()


def report(cm, minority_class: int, y_true=None, y_score=None) -> MetricReport:
    """All evaluation metrics from a confusion matrix.

    For binary tasks, sensitivity is the minority recall and specificity
    the majority recall; Type I = FP / (FP + TN) and Type II = FN / (FN + TP)
    with the minority class as positive. ``y_score`` (minority-class scores,
    with ``y_true``) enables AUPRC, which is binary-only.
    """
    cm = np.asarray(cm, dtype=np.int64)
    K = cm.shape[0]
    total = int(cm.sum())
    tp = np.diag(cm).astype(float)
    pred = cm.sum(axis=0).astype(float)
    true = cm.sum(axis=1).astype(float)
    precision = [_div(tp[k], pred[k]) for k in range(K)]
    recall = [_div(tp[k], true[k]) for k in range(K)]
    f1 = [_div(2 * precision[k] * recall[k], precision[k] + recall[k]) for k in range(K)]
    rep = MetricReport(
        macro_f1=float(np.mean(f1)),
        minority_f1=f1[minority_class],
        balanced_accuracy=float(np.mean(recall)),
        mcc=0.0,
        precision=precision,
        recall=recall,
        minority_class=int(minority_class),
        n=total,
    )
    if K == 2:
        m, o = minority_class, 1 - minority_class
        TP, FN, FP, TN = cm[m, m], cm[m, o], cm[o, m], cm[o, o]
        sens, spec = recall[m], recall[o]
        rep.g_mean = float(np.sqrt(sens * spec))
        rep.mcc = mcc_binary(TP, FP, FN, TN)
        rep.type_i_rate = _div(FP, FP + TN)
        rep.type_ii_rate = _div(FN, FN + TP)
    else:
        rep.mcc = mcc_multiclass(cm)
    if y_score is not None:
        if K != 2:
            raise UnsupportedMetricError("AUPRC is only defined for binary tasks")
        if y_true is None:
            raise ValueError("y_true is required with y_score")
        pos = np.asarray(y_true) == minority_class
        rep.auprc = auprc(pos, y_score) if pos.any() else None
    return rep


def evaluate(y_true, y_pred, n_classes: int, minority_class: int, y_score=None) -> MetricReport:
    return report(confusion(y_true, y_pred, n_classes), minority_class, y_true, y_score)
