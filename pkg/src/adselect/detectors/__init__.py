"""Pool of six unsupervised window detectors behind one fit/score/threshold contract.

Every detector is fit on normal windows only and scores an anomalous batch
with "higher = more anomalous" raw scores.  `threshold_and_label` turns raw
scores into 0/1 predictions by flagging exactly the top ``ceil(c * N)``
windows, which is what makes precision equal recall whenever the assumed
contamination matches the true anomaly count.
"""

from __future__ import annotations

import csv
import itertools
import math
import pickle
from dataclasses import dataclass

import numpy as np

from ._base import DetectorError, check_windows
from .ecdf_tails import CopodDetector, EcodDetector
from .iforest import IsolationForestDetector
from .knn import KNN_METHODS, KnnDetector
from .svm import OsvmDetector
from .usad import UsadDetector
from ..metrics import metrics

# canonical order: also the RL action order and the signal-column order
POOL = ("copod", "ecod", "iforest", "knn", "osvm", "usad")

_CLASSES = {
    "copod": CopodDetector,
    "ecod": EcodDetector,
    "iforest": IsolationForestDetector,
    "knn": KnnDetector,
    "osvm": OsvmDetector,
    "usad": UsadDetector,
}

# published search grids; copod/ecod are parameter-free and usad is tuned
# only when the caller supplies an explicit grid
APPENDIX_GRID = {
    "knn": {
        "n_neighbors": [1, 5, 10, 15, 20, 25, 50, 60, 70, 80, 90, 100],
        "method": list(KNN_METHODS),
    },
    "osvm": {"nu": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]},
    "iforest": {
        "n_estimators": [10, 20, 30, 40, 50, 75, 100, 150, 200],
        "max_features": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
    },
}

_SEEDED_KINDS = ("iforest", "usad")

_MODEL_FORMAT = 1


@dataclass
class DetectorOutput:
    """Scores and labels for one detector over one scored window set."""

    raw_scores: np.ndarray
    scaled_scores: np.ndarray
    threshold: float
    predicted_labels: np.ndarray


def normalize_kind(kind) -> str:
    k = str(kind).lower()
    if k not in POOL:
        raise DetectorError(f"unknown detector kind {kind!r}; expected one of {POOL}")
    return k


def fit(kind, normal_windows, **hyperparams):
    """Train one detector of the given kind on normal windows."""
    k = normalize_kind(kind)
    if k in ("copod", "ecod") and hyperparams:
        raise DetectorError(f"{k} takes no hyperparameters, got {sorted(hyperparams)}")
    try:
        model = _CLASSES[k](**hyperparams)
    except TypeError as exc:
        raise DetectorError(f"bad hyperparameters for {k}: {exc}") from exc
    X = np.asarray(normal_windows, dtype=np.float64)
    return model.fit(X)


def score(model, windows) -> np.ndarray:
    """Raw anomaly scores; higher means more anomalous."""
    return model.score(np.asarray(windows, dtype=np.float64))


def minmax_scores(raw_scores) -> np.ndarray:
    raw = np.asarray(raw_scores, dtype=np.float64)
    lo, hi = raw.min(), raw.max()
    if hi - lo == 0:
        raise DetectorError("constant scores: threshold is degenerate")
    return (raw - lo) / (hi - lo)


def threshold_and_label(raw_scores, contamination) -> DetectorOutput:
    """Label exactly the ceil(contamination * N) highest-scoring windows.

    The threshold reported is the largest scaled score left unlabeled, so
    with distinct scores ``label == 1  iff  scaled > threshold``.  Ties at
    the cut go to the earlier window index; the exact count always wins.
    """
    raw = np.asarray(raw_scores, dtype=np.float64)
    if raw.ndim != 1 or len(raw) == 0:
        raise DetectorError("raw_scores must be a non-empty 1-D array")
    if not 0.0 < contamination < 1.0:
        raise DetectorError(f"contamination must be in (0, 1), got {contamination}")
    n = len(raw)
    if contamination * n < 1.0 - 1e-9:
        raise DetectorError(f"need at least {math.ceil(1.0 / contamination)} scores, got {n}")
    scaled = minmax_scores(raw)
    # ceil(contamination * n) with a dust guard so k/n rates stay exact
    m = math.ceil(contamination * n - 1e-9)
    # descending score, ascending index on ties
    order = np.lexsort((np.arange(n), -scaled))
    labels = np.zeros(n, dtype=np.int64)
    labels[order[:m]] = 1
    threshold = float(scaled[order[m]]) if m < n else 0.0
    return DetectorOutput(
        raw_scores=raw,
        scaled_scores=scaled,
        threshold=threshold,
        predicted_labels=labels,
    )


def expand_grid(grid) -> list:
    """All combinations of a {name: [values]} grid, first key slowest."""
    if not grid:
        raise DetectorError("empty hyperparameter grid")
    names = list(grid)
    combos = []
    for values in itertools.product(*(grid[name] for name in names)):
        combos.append(dict(zip(names, values)))
    return combos


def tune(kind, normal_windows, anomalous_windows, labels, grid=None, budget=None,
         contamination=0.05, seed=0):
    """Pick the grid entry with the best F1 on the labeled anomalous set.

    Exhaustive when budget is None or covers the grid, otherwise a seeded
    random subset of that size.  Equal F1 resolves to the earlier entry in
    grid order.  Note the search scores against the provided labels, so
    keep those labels out of any downstream evaluation split.
    """
    k = normalize_kind(kind)
    if k in ("copod", "ecod"):
        raise DetectorError(f"{k} is deterministic and has no hyperparameters to tune")
    if grid is None:
        grid = APPENDIX_GRID.get(k)
        if grid is None:
            raise DetectorError(f"no default grid for {k}; pass one explicitly")
    combos = expand_grid(grid)
    if budget is not None and 0 < budget < len(combos):
        rng = np.random.default_rng(seed)
        picked = np.sort(rng.choice(len(combos), size=budget, replace=False))
        combos = [combos[i] for i in picked]

    truth = np.asarray(labels, dtype=np.int64)
    best_params, best_f1 = None, -1.0
    for params in combos:
        full = dict(params)
        if k in _SEEDED_KINDS:
            full.setdefault("seed", seed)
        model = fit(k, normal_windows, **full)
        out = threshold_and_label(model.score(np.asarray(anomalous_windows, dtype=np.float64)),
                                  contamination)
        f1 = metrics(out.predicted_labels, truth).f1
        if f1 > best_f1:
            best_params, best_f1 = params, f1
    return dict(best_params)


def save_model(model, path):
    blob = {"format_version": _MODEL_FORMAT, "kind": model.kind, "model": model}
    with open(path, "wb") as fh:
        pickle.dump(blob, fh)


def load_model(path):
    with open(path, "rb") as fh:
        blob = pickle.load(fh)
    if not isinstance(blob, dict) or blob.get("format_version") != _MODEL_FORMAT:
        raise DetectorError(f"unrecognized model file {path}")
    return blob["model"]


def save_scores_csv(path, output: DetectorOutput):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_index", "raw", "scaled", "label"])
        for i in range(len(output.raw_scores)):
            writer.writerow([
                i,
                repr(float(output.raw_scores[i])),
                repr(float(output.scaled_scores[i])),
                int(output.predicted_labels[i]),
            ])


__all__ = [
    "POOL",
    "APPENDIX_GRID",
    "DetectorError",
    "DetectorOutput",
    "CopodDetector",
    "EcodDetector",
    "IsolationForestDetector",
    "KnnDetector",
    "OsvmDetector",
    "UsadDetector",
    "KNN_METHODS",
    "check_windows",
    "normalize_kind",
    "fit",
    "score",
    "minmax_scores",
    "threshold_and_label",
    "expand_grid",
    "tune",
    "save_model",
    "load_model",
    "save_scores_csv",
]
