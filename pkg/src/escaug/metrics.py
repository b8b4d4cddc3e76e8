"""Classification metrics over confusion matrices.

Rows index the true class, columns the predicted class.  Macro scores
define 0/0 as 0 so absent classes do not poison the average.
"""

from __future__ import annotations

import numpy as np


def confusion_matrix(y_true, y_pred, n_classes: int) -> np.ndarray:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("label arrays must have equal length")
    if y_true.size == 0:
        raise ValueError("cannot build a confusion matrix from no samples")
    bad = (y_true < 0) | (y_true >= n_classes) | (y_pred < 0) | (y_pred >= n_classes)
    if bad.any():
        raise ValueError(f"labels out of range [0, {n_classes}) at index {int(np.flatnonzero(bad)[0])}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    np.divide(num, den, out=out, where=den > 0)
    return out


def scores(cm: np.ndarray) -> dict[str, float]:
    """Accuracy plus macro-averaged precision/recall/F1."""
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    diag = np.diag(cm)
    precision = _safe_div(diag, cm.sum(axis=0))
    recall = _safe_div(diag, cm.sum(axis=1))
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    return {
        "accuracy": float(diag.sum() / total),
        "precision": float(precision.mean()),
        "recall": float(recall.mean()),
        "f1": float(f1.mean()),
    }


def cohen_kappa(cm: np.ndarray) -> float:
    """Agreement beyond chance, (p_o - p_e) / (1 - p_e).

    Computed as (N*trace - sum(row*col)) / (N^2 - sum(row*col)) so integer
    counts give the exactly rounded result (one division, no intermediate
    rounding).  Degenerate chance agreement (p_e >= 1, i.e. the scaled
    denominator is nonpositive) and an empty matrix both yield 0.
    """
    cm = np.asarray(cm, dtype=np.float64)
    total = cm.sum()
    if total == 0:
        return 0.0
    agree = np.diag(cm).sum()
    chance = float((cm.sum(axis=1) * cm.sum(axis=0)).sum())
    denom = total * total - chance
    if denom <= 0:
        return 0.0
    return float((total * agree - chance) / denom)


def row_normalize(cm: np.ndarray) -> np.ndarray:
    """Per-true-class proportions; all-zero rows stay zero."""
    cm = np.asarray(cm, dtype=np.float64)
    sums = cm.sum(axis=1, keepdims=True)
    return np.divide(cm, sums, out=np.zeros_like(cm), where=sums > 0)


def difference_matrix(cm_a: np.ndarray, cm_b: np.ndarray) -> np.ndarray:
    """Row-normalized A minus row-normalized B (per-class shift in
    prediction mass between two schemes)."""
    if np.shape(cm_a) != np.shape(cm_b):
        raise ValueError("confusion matrices must have equal shape")
    return row_normalize(cm_a) - row_normalize(cm_b)


def aggregate_folds(fold_metrics: list[dict[str, float]]) -> dict[str, tuple[float, float]]:
    """Mean and population standard deviation per metric across folds."""
    if not fold_metrics:
        raise ValueError("no fold metrics to aggregate")
    keys = fold_metrics[0].keys()
    out = {}
    for k in keys:
        vals = np.array([m[k] for m in fold_metrics], dtype=np.float64)
        out[k] = (float(vals.mean()), float(vals.std()))
    return out
