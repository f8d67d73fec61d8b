"""ECDF-tail detectors: per-dimension tails (ECOD) and pooled copula tails (COPOD).

Both score a window by summing, over its six coordinates, the larger of the
negative log left-tail and right-tail empirical probabilities, with the
skewness sign picking the "automatic" tail per coordinate.  Taking the tail
maximum per coordinate (rather than per whole window) keeps the score
monotone as a coordinate moves past the sample extremes.

The two differ in where the ECDFs come from: ECOD freezes them on the
training windows; COPOD builds its empirical copula on the pooled training
plus scored sample, so a batch is ranked within its own joint distribution.
Tail probabilities are clipped below at 1/(n+1), so a point past every
sample contributes log(n+1), the saturation value.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import skew

from ._base import DetectorError, check_windows


def tail_log_scores(sorted_cols, X, skew_sign):
    """Per-coordinate max of left/right/auto -log tail probabilities.

    Parameters
    ----------
    sorted_cols : np.ndarray
        (n, d) reference sample, each column sorted ascending.
    X : np.ndarray
        (m, d) points to score.
    skew_sign : np.ndarray
        (d,) sign of the reference skewness; negative selects the left
        tail as the automatic one, otherwise the right tail.
    """
    n, d = sorted_cols.shape
    floor = 1.0 / (n + 1)
    out = np.empty_like(X)
    for j in range(d):
        col = sorted_cols[:, j]
        left = np.searchsorted(col, X[:, j], side="right") / n
        right = (n - np.searchsorted(col, X[:, j], side="left")) / n
        u_l = -np.log(np.clip(left, floor, 1.0))
        u_r = -np.log(np.clip(right, floor, 1.0))
        u_auto = u_l if skew_sign[j] < 0 else u_r
        out[:, j] = np.maximum(np.maximum(u_l, u_r), u_auto)
    return out


class EcodDetector:
    """Tail surprise against per-dimension ECDFs frozen on the clean windows."""

    kind = "ecod"

    def __init__(self):
        self._sorted = None
        self._skew_sign = None

    def fit(self, X):
        X = check_windows(X, min_rows=2)
        self._sorted = np.sort(X, axis=0)
        self._skew_sign = np.sign(np.nan_to_num(skew(X, axis=0)))
        return self

    def score(self, X):
        if self._sorted is None:
            raise DetectorError("detector is not fitted")
        X = check_windows(X, width=self._sorted.shape[1])
        return tail_log_scores(self._sorted, X, self._skew_sign).sum(axis=1)

    def params(self):
        return {}


class CopodDetector:
    """Empirical-copula tail surprise over the pooled clean + scored windows."""

    kind = "copod"

    def __init__(self):
        self._train = None

    def fit(self, X):
        self._train = check_windows(X, min_rows=2).copy()
        return self

    def score(self, X):
        if self._train is None:
            raise DetectorError("detector is not fitted")
        X = check_windows(X, width=self._train.shape[1])
        pooled = np.concatenate([self._train, X], axis=0)
        skew_sign = np.sign(np.nan_to_num(skew(pooled, axis=0)))
        contrib = tail_log_scores(np.sort(pooled, axis=0), X, skew_sign)
        return contrib.sum(axis=1)

    def params(self):
        return {}
