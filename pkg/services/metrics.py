"""
Classification Metrics
======================

Confusion-matrix tallies and the accuracy / sensitivity / specificity /
precision / F1 figures, per class (one-vs-rest) and overall.

Overall figures collapse the five classes to normal (N) versus non-normal
(S, V, F, Q):
  TN = normal beats predicted normal
  TP = non-normal beats predicted as their own class
  FN = non-normal beats predicted normal
  FP = normal beats predicted non-normal, plus non-normal beats assigned the
       wrong non-normal class
so TP + TN + FP + FN equals the number of beats and the overall accuracy is
the multiclass trace / total. Specificity is taken over normal beats only:
TN / (TN + normal beats predicted non-normal).

Any 0/0 ratio is reported as 0 and named in `MetricsRow.degenerate`.
"""

import numpy as np
from sklearn.metrics import confusion_matrix

from core.exceptions import MetricsError
from data.models import CLASS_ORDER, NUM_CLASSES, MetricsRow

NORMAL = 0


def confusion(preds, labels) -> np.ndarray:
    """5x5 counts, rows = true class, columns = predicted class."""
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    if preds.shape != labels.shape:
        raise MetricsError(f"{preds.size} predictions for {labels.size} labels", context="confusion")
    for name, arr in (("prediction", preds), ("label", labels)):
        if arr.size and (arr.min() < 0 or arr.max() >= NUM_CLASSES):
            raise MetricsError(f"{name} outside [0, {NUM_CLASSES})", context="confusion")
    if labels.size == 0:
        return np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    return confusion_matrix(labels, preds, labels=list(range(NUM_CLASSES))).astype(np.int64)


def _ratio(num: float, den: float, name: str, degenerate: list[str]) -> float:
    if den == 0:
        degenerate.append(name)
        return 0.0
    return num / den


def _row(label: str, tp: int, tn: int, fp: int, fn: int, spec_fp: int | None = None) -> MetricsRow:
    degenerate: list[str] = []
    total = tp + tn + fp + fn
    spec_fp = fp if spec_fp is None else spec_fp
    accuracy = _ratio(tp + tn, total, "accuracy", degenerate)
    sensitivity = _ratio(tp, tp + fn, "sensitivity", degenerate)
    specificity = _ratio(tn, tn + spec_fp, "specificity", degenerate)
    precision = _ratio(tp, tp + fp, "precision", degenerate)
    f1 = _ratio(2 * precision * sensitivity, precision + sensitivity, "f1", degenerate)
    return MetricsRow(
        label=label, accuracy=accuracy, sensitivity=sensitivity, specificity=specificity,
        precision=precision, f1=f1, degenerate=degenerate,
    )


def _check(cm: np.ndarray) -> np.ndarray:
    cm = np.asarray(cm, dtype=np.int64)
    if cm.shape != (NUM_CLASSES, NUM_CLASSES) or np.any(cm < 0):
        raise MetricsError(f"expected a non-negative {NUM_CLASSES}x{NUM_CLASSES} matrix, got {cm.shape}")
    if cm.sum() == 0:
        raise MetricsError("confusion matrix is empty", context="metrics")
    return cm


def one_vs_rest(cm: np.ndarray, c: int) -> tuple[int, int, int, int]:
    """(TP, TN, FP, FN) of class `c` against all others."""
    cm = np.asarray(cm, dtype=np.int64)
    tp = int(cm[c, c])
    fp = int(cm[:, c].sum()) - tp
    fn = int(cm[c, :].sum()) - tp
    tn = int(cm.sum()) - tp - fp - fn
    return tp, tn, fp, fn


def per_class_metrics(cm: np.ndarray, c: int) -> MetricsRow:
    cm = _check(cm)
    if not 0 <= c < NUM_CLASSES:
        raise MetricsError(f"class index {c} outside [0, {NUM_CLASSES})")
    tp, tn, fp, fn = one_vs_rest(cm, c)
    return _row(CLASS_ORDER[c].value, tp, tn, fp, fn)


def binary_counts(cm: np.ndarray) -> tuple[int, int, int, int, int]:
    """(TP, TN, FP, FN, normal-predicted-non-normal) of the normal / non-normal collapse."""
    cm = np.asarray(cm, dtype=np.int64)
    tn = int(cm[NORMAL, NORMAL])
    tp = int(np.trace(cm)) - tn
    fn = int(cm[NORMAL + 1:, NORMAL].sum())
    normal_as_abnormal = int(cm[NORMAL, NORMAL + 1:].sum())
    fp = int(cm.sum()) - tp - tn - fn
    return tp, tn, fp, fn, normal_as_abnormal


def overall_metrics(cm: np.ndarray) -> MetricsRow:
    cm = _check(cm)
    tp, tn, fp, fn, normal_as_abnormal = binary_counts(cm)
    return _row("Total", tp, tn, fp, fn, spec_fp=normal_as_abnormal)


def metrics_rows(cm: np.ndarray) -> list[MetricsRow]:
    """Per-class rows in N, S, V, F, Q order followed by the overall row."""
    return [per_class_metrics(cm, c) for c in range(NUM_CLASSES)] + [overall_metrics(cm)]
