"""Distance-based detector: aggregate distance to the k nearest clean windows."""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from ._base import DetectorError, check_windows

KNN_METHODS = ("largest", "mean", "median")


class KnnDetector:
    """Scores a window by its distance to the k nearest training windows.

    Parameters
    ----------
    n_neighbors : int
        Number of neighbours queried.
    method : {"largest", "mean", "median"}
        Aggregation over the k neighbour distances; ``largest`` is the
        classical k-th-neighbour distance.
    """

    kind = "knn"

    def __init__(self, n_neighbors=5, method="mean"):
        if n_neighbors < 1:
            raise DetectorError("n_neighbors must be >= 1")
        if method not in KNN_METHODS:
            raise DetectorError(f"method must be one of {KNN_METHODS}, got {method!r}")
        self.n_neighbors = int(n_neighbors)
        self.method = method
        self._train = None
        self._tree = None

    def fit(self, X):
        X = check_windows(X, min_rows=2)
        self._train = X.copy()
        self._tree = cKDTree(self._train)
        return self

    def score(self, X):
        if self._tree is None:
            raise DetectorError("detector is not fitted")
        X = check_windows(X, width=self._train.shape[1])
        k = min(self.n_neighbors, len(self._train))
        dist, _ = self._tree.query(X, k=k)
        dist = np.atleast_2d(dist.reshape(len(X), k))
        return aggregate_distances(dist, self.method)

    def params(self):
        return {"n_neighbors": self.n_neighbors, "method": self.method}


def aggregate_distances(dist, method):
    """Collapse a (n, k) neighbour-distance block into one score per row."""
    if method == "largest":
        return dist[:, -1].astype(np.float64)
    if method == "mean":
        return dist.mean(axis=1)
    if method == "median":
        return np.median(dist, axis=1)
    raise DetectorError(f"unknown aggregation {method!r}")
