"""Clustering accuracy, normalized mutual information and purity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from sklearn.metrics import normalized_mutual_info_score

from .exceptions import InvalidInput, LengthMismatch


def _check_pair(pred, truth):
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise LengthMismatch(f"prediction has {pred.size} labels, truth has {truth.size}")
    if pred.size == 0:
        raise InvalidInput("empty label vectors")
    return pred, truth


def contingency(pred, truth):
    """Counts with predicted clusters in rows and true classes in columns."""
    pred, truth = _check_pair(pred, truth)
    _, p = np.unique(pred, return_inverse=True)
    _, t = np.unique(truth, return_inverse=True)
    table = np.zeros((p.max() + 1, t.max() + 1), dtype=np.int64)
    np.add.at(table, (p, t), 1)
    return table


def accuracy(pred, truth):
    """Fraction matched under the best one-to-one relabeling of ``pred``.

    The contingency table is zero-padded to a square so unequal cluster
    counts are allowed.
    """
    table = contingency(pred, truth)
    k = max(table.shape)
    square = np.zeros((k, k), dtype=np.int64)
    square[: table.shape[0], : table.shape[1]] = table
    rows, cols = linear_sum_assignment(square, maximize=True)
    return square[rows, cols].sum() / table.sum()


def nmi(pred, truth, average="geometric"):
    """Mutual information normalized by the geometric (or arithmetic) mean entropy."""
    pred, truth = _check_pair(pred, truth)
    if average not in ("geometric", "arithmetic"):
        raise InvalidInput(f"unknown NMI normalization {average!r}")
    return float(normalized_mutual_info_score(truth, pred, average_method=average))


def purity(pred, truth):
    table = contingency(pred, truth)
    return table.max(axis=1).sum() / table.sum()


@dataclass(frozen=True)
class MetricReport:
    acc: float
    nmi: float
    purity: float
    contingency: np.ndarray

    def as_dict(self):
        return {"acc": self.acc, "nmi": self.nmi, "purity": self.purity}

    def to_lines(self):
        """``key=value`` lines, one per metric."""
        return "".join(f"{k}={v:.6f}\n" for k, v in self.as_dict().items())

    def to_table(self):
        return "\n".join(f"{k.upper():<7}{v * 100:8.2f}%" for k, v in self.as_dict().items())


def evaluate(pred, truth, average="geometric") -> MetricReport:
    return MetricReport(
        acc=float(accuracy(pred, truth)),
        nmi=nmi(pred, truth, average=average),
        purity=float(purity(pred, truth)),
        contingency=contingency(pred, truth),
    )
