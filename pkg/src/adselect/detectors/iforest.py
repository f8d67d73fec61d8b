"""Isolation forest: anomalies need few random axis-aligned cuts to isolate."""

from __future__ import annotations

import numpy as np

from ._base import DetectorError, check_windows

EULER_GAMMA = 0.5772156649015329
DEFAULT_SUBSAMPLE = 256


def average_path_length(n):
    """Expected unsuccessful-search depth c(n) in a binary search tree."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (np.log(n - 1.0) + EULER_GAMMA) - 2.0 * (n - 1.0) / n


class _Node:
    __slots__ = ("feature", "split", "left", "right", "size")

    def __init__(self, feature=-1, split=0.0, left=None, right=None, size=0):
        self.feature = feature
        self.split = split
        self.left = left
        self.right = right
        self.size = size

    @property
    def is_leaf(self):
        return self.left is None


def grow_tree(X, features, depth, height_limit, rng):
    n = len(X)
    if depth >= height_limit or n <= 1:
        return _Node(size=n)
    # only features that still vary inside this node can split it
    usable = [f for f in features if X[:, f].min() < X[:, f].max()]
    if not usable:
        return _Node(size=n)
    feature = int(rng.choice(usable))
    lo, hi = X[:, feature].min(), X[:, feature].max()
    split = float(rng.uniform(lo, hi))
    mask = X[:, feature] < split
    return _Node(
        feature=feature,
        split=split,
        left=grow_tree(X[mask], features, depth + 1, height_limit, rng),
        right=grow_tree(X[~mask], features, depth + 1, height_limit, rng),
        size=n,
    )


def path_lengths(node, X, idx, depth, out):
    """Fill ``out[idx]`` with adjusted path lengths, descending in bulk."""
    if node.is_leaf:
        out[idx] = depth + average_path_length(node.size)
        return
    mask = X[idx, node.feature] < node.split
    if mask.any():
        path_lengths(node.left, X, idx[mask], depth + 1, out)
    if not mask.all():
        path_lengths(node.right, X, idx[~mask], depth + 1, out)


class IsolationForestDetector:
    """Forest of random isolation trees on subsampled clean windows.

    Parameters
    ----------
    n_estimators : int
        Trees in the forest.
    max_features : float
        Fraction of window coordinates available to each tree.
    subsample : int
        Rows drawn (without replacement) per tree; capped at the training
        size.  The height limit is ``ceil(log2(subsample))``.
    seed : int
    """

    kind = "iforest"

    def __init__(self, n_estimators=100, max_features=1.0, subsample=DEFAULT_SUBSAMPLE, seed=0):
        if n_estimators < 1:
            raise DetectorError("n_estimators must be >= 1")
        if not 0.0 < max_features <= 1.0:
            raise DetectorError("max_features must be in (0, 1]")
        self.n_estimators = int(n_estimators)
        self.max_features = float(max_features)
        self.subsample = int(subsample)
        self.seed = int(seed)
        self._trees = None
        self._subsample_used = None

    def fit(self, X):
        X = check_windows(X, min_rows=2)
        n, d = X.shape
        psi = min(self.subsample, n)
        height_limit = int(np.ceil(np.log2(max(psi, 2))))
        n_feat = max(1, int(self.max_features * d))
        rng = np.random.default_rng(self.seed)
        self._trees = []
        for _ in range(self.n_estimators):
            rows = rng.choice(n, size=psi, replace=False)
            features = rng.choice(d, size=n_feat, replace=False)
            self._trees.append(grow_tree(X[rows], list(features), 0, height_limit, rng))
        self._subsample_used = psi
        self._width = d
        return self

    def score(self, X):
        if self._trees is None:
            raise DetectorError("detector is not fitted")
        X = check_windows(X, width=self._width)
        depths = np.zeros(len(X))
        buf = np.empty(len(X))
        idx = np.arange(len(X))
        for tree in self._trees:
            path_lengths(tree, X, idx, 0, buf)
            depths += buf
        depths /= len(self._trees)
        return np.power(2.0, -depths / average_path_length(self._subsample_used))

    def params(self):
        return {"n_estimators": self.n_estimators, "max_features": self.max_features, "seed": self.seed}
