"""Evaluation: confusion matrix, accuracy, and per-class precision/recall/F1."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, LabelError


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # (K, K) counts, rows = true class, cols = predicted
    precision: np.ndarray  # (K,)
    recall: np.ndarray     # (K,)
    f1: np.ndarray         # (K,)
    support: np.ndarray    # (K,) row sums

    def normalized_confusion(self) -> np.ndarray:
        """Row-stochastic confusion matrix; empty rows stay all-zero."""
        row_sums = self.confusion.sum(axis=1, keepdims=True)
        safe = np.where(row_sums == 0, 1, row_sums)
        return self.confusion / safe

    def render(self, class_names) -> str:
        """Human-readable report: accuracy, normalized confusion, per-class table."""
        k = len(self.support)
        width = max(len(n) for n in class_names)
        lines = [f"accuracy: {self.accuracy:.3f}", "", "normalized confusion (rows = true):"]
        norm = self.normalized_confusion()
        for i in range(k):
            cells = " ".join(f"{norm[i, j]:.2f}" for j in range(k))
            lines.append(f"  {class_names[i]:<{width}} {cells}")
        lines.append("")
        lines.append(f"  {'class':<{width}} {'precision':>9} {'recall':>9} {'f1':>9} {'support':>9}")
        for i in range(k):
            lines.append(f"  {class_names[i]:<{width}} {self.precision[i]:>9.3f} "
                         f"{self.recall[i]:>9.3f} {self.f1[i]:>9.3f} {self.support[i]:>9d}")
        return "\n".join(lines)


def confusion_matrix(y_true, y_pred, class_count: int) -> np.ndarray:
    t = np.asarray(y_true, dtype=np.int64)
    p = np.asarray(y_pred, dtype=np.int64)
    if t.shape != p.shape:
        raise DataError(f"{t.shape[0]} labels vs {p.shape[0]} predictions")
    if t.size == 0:
        raise DataError("empty evaluation set")
    for arr, what in ((t, "label"), (p, "prediction")):
        if arr.min() < 0 or arr.max() >= class_count:
            raise LabelError(f"{what} outside [0, {class_count})")
    conf = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(conf, (t, p), 1)
    return conf


def report_from_confusion(conf: np.ndarray) -> EvalReport:
    diag = np.diag(conf).astype(np.float64)
    row = conf.sum(axis=1).astype(np.float64)
    col = conf.sum(axis=0).astype(np.float64)
    precision = np.divide(diag, col, out=np.zeros_like(diag), where=col > 0)
    recall = np.divide(diag, row, out=np.zeros_like(diag), where=row > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(diag), where=denom > 0)
    return EvalReport(accuracy=float(diag.sum() / conf.sum()),
                      confusion=conf,
                      precision=precision,
                      recall=recall,
                      f1=f1,
                      support=conf.sum(axis=1))


def evaluate(model, dataset, batch_size: int = 128) -> EvalReport:
    """Run inference over a dataset and compute the full metric surface."""
    if len(dataset) == 0:
        raise DataError("empty evaluation set")
    k = model.class_count
    if dataset.labels.min() < 0 or dataset.labels.max() >= k:
        raise LabelError(f"dataset labels outside [0, {k})")
    preds = np.empty(len(dataset), dtype=np.int64)
    for start in range(0, len(dataset), batch_size):
        xb = dataset.images[start:start + batch_size]
        probs = model.predict_probs(xb)
        preds[start:start + len(xb)] = probs.argmax(axis=1)
    return report_from_confusion(confusion_matrix(dataset.labels, preds, k))
