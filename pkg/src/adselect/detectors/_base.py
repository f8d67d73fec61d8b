"""Shared validation helpers for the detector pool."""

from __future__ import annotations

import numpy as np


class DetectorError(ValueError):
    """Bad hyperparameters, unusable inputs, or scoring failures."""


def check_windows(X, width=None, min_rows=1):
    """Validate a (n, W) window block: 2-D, finite, expected width."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DetectorError(f"expected a 2-D window block, got shape {X.shape}")
    if len(X) < min_rows:
        raise DetectorError(f"need at least {min_rows} windows, got {len(X)}")
    if width is not None and X.shape[1] != width:
        raise DetectorError(f"window length {X.shape[1]} does not match training length {width}")
    if not np.all(np.isfinite(X)):
        bad = int(np.flatnonzero(~np.isfinite(X).all(axis=1))[0])
        raise DetectorError(f"non-finite values in window {bad}")
    return X


def check_scores(scores):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if not np.all(np.isfinite(scores)):
        bad = int(np.flatnonzero(~np.isfinite(scores))[0])
        raise DetectorError(f"non-finite score at window {bad}")
    return scores
