import numpy as np
from scipy.stats import rankdata

from .exceptions import UndefinedMetricError


def rmse(y_hat, y):
    y_hat = np.asarray(y_hat, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    if y_hat.shape != y.shape:
        raise ValueError(f"length mismatch: {y_hat.shape} vs {y.shape}")
    return float(np.sqrt(np.mean((y_hat - y) ** 2)))


def auc(scores, y):
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    Tied scores contribute one half.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(y).ravel()
    if scores.shape != y.shape:
        raise ValueError(f"length mismatch: {scores.shape} vs {y.shape}")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs both classes present")
    ranks = rankdata(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))
