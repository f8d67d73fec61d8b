"""Per-detector correctness classifiers built on interval features.

Each detector gets a forest whose trees draw random intervals over the
11-value feature row (six window values plus that detector's five signals,
treated as an ordered pseudo-series), summarize every interval by mean,
standard deviation and least-squares slope, and split on those summaries
by information gain.  The class says whether the detector's label matched
ground truth, so a trained forest stands in for the missing 80% of labels.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .detectors import POOL
from .signals import SignalTable, SignalError

TSF_ROW_LENGTH = 11
DEFAULT_N_TREES = 100
DEFAULT_MIN_INTERVAL = 1
TSF_FORMAT = 1


class TsfError(ValueError):
    pass


def detector_feature_columns(kind) -> list:
    """Column names of one detector's TSF row, in contract order."""
    return [f"w{i}" for i in range(6)] + [
        f"scaled_score_{kind}",
        f"threshold_{kind}",
        f"predicted_label_{kind}",
        f"dist_conf_{kind}",
        f"consensus_conf_{kind}",
    ]


@dataclass
class TsfDataset:
    kind: str
    features: np.ndarray  # (n, 11)
    target: np.ndarray    # (n,) 1 = detector was right

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.target = np.asarray(self.target, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[1] != TSF_ROW_LENGTH:
            raise TsfError(f"features must be (n, {TSF_ROW_LENGTH}), got {self.features.shape}")
        if self.target.shape != (len(self.features),):
            raise TsfError("target length does not match features")

    def __len__(self):
        return len(self.features)

    def subset(self, indices) -> "TsfDataset":
        idx = np.asarray(indices)
        return TsfDataset(self.kind, self.features[idx], self.target[idx])


def build_dataset(table: SignalTable, detector) -> TsfDataset:
    """Slice one detector's 11 feature columns and derive the correctness target."""
    if isinstance(detector, str):
        kind = detector.lower()
        if kind not in POOL:
            raise TsfError(f"unknown detector {detector!r}")
    else:
        if not 0 <= detector < len(POOL):
            raise TsfError(f"detector index {detector} out of range 0..{len(POOL) - 1}")
        kind = POOL[detector]
    try:
        cols = np.column_stack([table.column(name) for name in detector_feature_columns(kind)])
        predicted = table.column(f"predicted_label_{kind}").astype(np.int64)
    except SignalError as exc:
        raise TsfError(str(exc)) from None
    target = (predicted == table.ground_truth).astype(np.int64)
    return TsfDataset(kind=kind, features=cols, target=target)


def stratified_indices(target, train_frac=0.2, seed=0):
    """Deterministic stratified index split; returns (train_idx, test_idx) sorted.

    Falls back to an unstratified split (with a warning) when a class is
    absent.  Per-class train counts use largest-remainder rounding so the
    total is always round(train_frac * n).
    """
    target = np.asarray(target, dtype=np.int64)
    n = len(target)
    if n < 10:
        raise TsfError(f"need at least 10 rows to split, got {n}")
    rng = np.random.default_rng(seed)
    want = int(round(train_frac * n))
    classes = np.unique(target)
    if len(classes) < 2:
        warnings.warn("single-class target: falling back to unstratified split")
        perm = rng.permutation(n)
        train = np.sort(perm[:want])
        test = np.sort(perm[want:])
        return train, test

    shares = []
    for c in classes:
        idx = np.flatnonzero(target == c)
        exact = train_frac * len(idx)
        shares.append([c, idx, int(math.floor(exact)), exact - math.floor(exact)])
    short = want - sum(s[2] for s in shares)
    for s in sorted(shares, key=lambda s: -s[3])[:short]:
        s[2] += 1
    train_parts = []
    for c, idx, k, _ in shares:
        perm = rng.permutation(len(idx))
        train_parts.append(idx[perm[:k]])
    train = np.sort(np.concatenate(train_parts))
    mask = np.ones(n, dtype=bool)
    mask[train] = False
    return train, np.flatnonzero(mask)


def split_20_80(ds: TsfDataset, seed=0):
    """Stratified 20% train / 80% test split of one dataset."""
    train_idx, test_idx = stratified_indices(ds.target, train_frac=0.2, seed=seed)
    return ds.subset(train_idx), ds.subset(test_idx)


def interval_features(rows, intervals) -> np.ndarray:
    """Mean, stdev and slope of each interval; (n, 3 * len(intervals))."""
    rows = np.asarray(rows, dtype=np.float64)
    feats = np.empty((len(rows), 3 * len(intervals)), dtype=np.float64)
    for j, (a, b) in enumerate(intervals):
        seg = rows[:, a:b]
        length = b - a
        feats[:, 3 * j] = seg.mean(axis=1)
        feats[:, 3 * j + 1] = seg.std(axis=1)
        if length < 2:
            feats[:, 3 * j + 2] = 0.0
        else:
            t = np.arange(length, dtype=np.float64)
            t_centered = t - t.mean()
            denom = float(np.sum(t_centered ** 2))
            feats[:, 3 * j + 2] = (seg - seg.mean(axis=1, keepdims=True)) @ t_centered / denom
    return feats


def _entropy(counts):
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-np.sum(p * np.log2(p)))


def _best_split(feats, target):
    """(feature, threshold, gain) maximizing information gain, or None.

    Ties resolve to the lower threshold, then the lower feature index.
    """
    n = len(target)
    parent = _entropy(np.bincount(target, minlength=2))
    best = None
    for j in range(feats.shape[1]):
        col = feats[:, j]
        order = np.argsort(col, kind="stable")
        sorted_col = col[order]
        sorted_t = target[order]
        ones_left = np.cumsum(sorted_t)
        total_ones = ones_left[-1]
        # candidate cuts between distinct neighbors
        cuts = np.flatnonzero(sorted_col[1:] > sorted_col[:-1])
        for i in cuts:
            n_left = i + 1
            left_ones = ones_left[i]
            left = np.array([n_left - left_ones, left_ones])
            right = np.array([(n - n_left) - (total_ones - left_ones), total_ones - left_ones])
            gain = parent - (n_left / n) * _entropy(left) - ((n - n_left) / n) * _entropy(right)
            threshold = 0.5 * (sorted_col[i] + sorted_col[i + 1])
            key = (-gain, threshold, j)
            if best is None or key < best[0]:
                best = (key, j, threshold, gain)
    if best is None or best[3] <= 1e-12:
        return None
    return best[1], best[2], best[3]


def _grow(feats, target):
    ones = int(target.sum())
    # leaf ties go to class 1, the optimistic default
    majority = 1 if 2 * ones >= len(target) else 0
    if ones == 0 or ones == len(target):
        return {"leaf": majority}
    found = _best_split(feats, target)
    if found is None:
        return {"leaf": majority}
    j, threshold, _ = found
    mask = feats[:, j] <= threshold
    if mask.all() or not mask.any():
        return {"leaf": majority}
    return {
        "feature": j,
        "threshold": float(threshold),
        "left": _grow(feats[mask], target[mask]),
        "right": _grow(feats[~mask], target[~mask]),
    }


def _tree_predict(node, feats):
    out = np.empty(len(feats), dtype=np.int64)
    stack = [(node, np.arange(len(feats)))]
    while stack:
        nd, idx = stack.pop()
        if "leaf" in nd:
            out[idx] = nd["leaf"]
            continue
        go_left = feats[idx, nd["feature"]] <= nd["threshold"]
        stack.append((nd["left"], idx[go_left]))
        stack.append((nd["right"], idx[~go_left]))
    return out


def _draw_intervals(rng, row_length, n_intervals, min_interval):
    intervals = []
    for _ in range(n_intervals):
        a = int(rng.integers(0, row_length - min_interval + 1))
        b = int(rng.integers(a + min_interval, row_length + 1))
        intervals.append((a, b))
    return intervals


@dataclass
class TsfModel:
    kind: str
    n_trees: int
    min_interval: int
    seed: int
    trees: list = field(default_factory=list)  # each: {"intervals": [...], "root": node}

    def predict(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != TSF_ROW_LENGTH:
            raise TsfError(f"rows must be (n, {TSF_ROW_LENGTH}), got {rows.shape}")
        votes = np.zeros(len(rows), dtype=np.int64)
        for tree in self.trees:
            feats = interval_features(rows, tree["intervals"])
            votes += _tree_predict(tree["root"], feats)
        # forest ties also go to class 1
        return (2 * votes >= len(self.trees)).astype(np.int64)


def fit_tsf(ds_train: TsfDataset, n_trees=DEFAULT_N_TREES, min_interval=DEFAULT_MIN_INTERVAL,
            seed=0) -> TsfModel:
    if len(ds_train) == 0:
        raise TsfError("empty training set")
    if not 1 <= min_interval <= TSF_ROW_LENGTH:
        raise TsfError(f"min_interval must be in 1..{TSF_ROW_LENGTH}")
    rng = np.random.default_rng(seed)
    n_intervals = int(math.sqrt(TSF_ROW_LENGTH))
    model = TsfModel(kind=ds_train.kind, n_trees=int(n_trees),
                     min_interval=int(min_interval), seed=int(seed))
    for _ in range(n_trees):
        intervals = _draw_intervals(rng, TSF_ROW_LENGTH, n_intervals, min_interval)
        feats = interval_features(ds_train.features, intervals)
        root = _grow(feats, ds_train.target)
        model.trees.append({"intervals": intervals, "root": root})
    return model


def save_tsf(model: TsfModel, path):
    blob = {
        "format_version": TSF_FORMAT,
        "kind": model.kind,
        "n_trees": model.n_trees,
        "min_interval": model.min_interval,
        "seed": model.seed,
        "trees": [
            {"intervals": [list(ab) for ab in tree["intervals"]], "root": tree["root"]}
            for tree in model.trees
        ],
    }
    with open(path, "w") as fh:
        json.dump(blob, fh)


def load_tsf(path) -> TsfModel:
    with open(path) as fh:
        blob = json.load(fh)
    if blob.get("format_version") != TSF_FORMAT:
        raise TsfError(f"unrecognized classifier file {path}")
    trees = [
        {"intervals": [tuple(ab) for ab in tree["intervals"]], "root": tree["root"]}
        for tree in blob["trees"]
    ]
    return TsfModel(kind=blob["kind"], n_trees=blob["n_trees"],
                    min_interval=blob["min_interval"], seed=blob["seed"], trees=trees)
