"""Confidence scores and the per-window signal table feeding TSF and the selector.

The table holds, per window, the six raw values plus five signals from each
detector (consensus confidence, distance-to-threshold confidence, predicted
label, scaled score, threshold) and the ground-truth label.  Columns are
ordered alphabetically by detector and then by feature name, and that order
is frozen in the CSV header.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .detectors import POOL, DetectorOutput
from .series import WindowSet

N_DETECTORS = len(POOL)
FEATURES_PER_DETECTOR = ("consensus_conf", "dist_conf", "predicted_label", "scaled_score", "threshold")
WINDOW_COLUMNS = tuple(f"w{i}" for i in range(6))


class SignalError(ValueError):
    pass


def table_columns() -> tuple:
    cols = list(WINDOW_COLUMNS)
    for kind in POOL:
        for feat in FEATURES_PER_DETECTOR:
            cols.append(f"{feat}_{kind}")
    cols.append("ground_truth")
    return tuple(cols)


TABLE_COLUMNS = table_columns()
N_FEATURES = len(TABLE_COLUMNS) - 1  # 36: everything except ground_truth


def dist_to_threshold(scaled_score, threshold, score_min=0.0, score_max=1.0) -> float:
    """Signed margin of a score over its threshold, normalized by score range."""
    if score_max < score_min:
        raise SignalError("score_max must be >= score_min")
    span = score_max - score_min
    if span == 0:
        raise SignalError("degenerate score range: min == max")
    return (scaled_score - threshold) / span


def consensus(labels_all_detectors, this_detector) -> float:
    """Fraction of the pool (self included) agreeing with this detector's label."""
    labels = np.asarray(labels_all_detectors, dtype=np.int64)
    if labels.shape != (N_DETECTORS,):
        raise SignalError(f"expected exactly {N_DETECTORS} labels, got shape {labels.shape}")
    mine = labels[this_detector]
    return float(np.sum(labels == mine)) / N_DETECTORS


@dataclass
class SignalTable:
    columns: tuple
    data: np.ndarray  # (n, len(columns)) float64

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise SignalError(
                f"data shape {self.data.shape} does not match {len(self.columns)} columns"
            )

    def __len__(self):
        return len(self.data)

    def column(self, name) -> np.ndarray:
        try:
            j = self.columns.index(name)
        except ValueError:
            raise SignalError(f"no column named {name!r}") from None
        return self.data[:, j]

    @property
    def features(self) -> np.ndarray:
        """The 36 feature columns (everything before ground_truth)."""
        return self.data[:, :N_FEATURES]

    @property
    def ground_truth(self) -> np.ndarray:
        return self.data[:, self.columns.index("ground_truth")].astype(np.int64)

    def detector_labels(self) -> np.ndarray:
        """(n, 6) predicted labels in pool order."""
        cols = [self.columns.index(f"predicted_label_{k}") for k in POOL]
        return self.data[:, cols].astype(np.int64)

    def subset(self, indices) -> "SignalTable":
        return SignalTable(columns=self.columns, data=self.data[np.asarray(indices)])


def assemble(window_set: WindowSet, outputs, margin_on="scaled") -> SignalTable:
    """Combine one WindowSet and six DetectorOutputs into a SignalTable.

    ``outputs`` maps detector kind -> DetectorOutput for every kind in the
    pool.  ``margin_on`` picks whether the distance confidence uses scaled
    scores (range denominator 1) or raw scores with their own min/max.
    """
    if margin_on not in ("scaled", "raw"):
        raise SignalError(f"margin_on must be 'scaled' or 'raw', got {margin_on!r}")
    missing = set(POOL) - set(outputs)
    if missing:
        raise SignalError(f"missing detector outputs: {sorted(missing)}")
    n = len(window_set.windows)
    for kind in POOL:
        out = outputs[kind]
        if not isinstance(out, DetectorOutput):
            raise SignalError(f"outputs[{kind!r}] is not a DetectorOutput")
        if len(out.predicted_labels) != n:
            raise SignalError(
                f"{kind} scored {len(out.predicted_labels)} windows, window set has {n}"
            )
    if window_set.window_labels is None:
        raise SignalError("window set has no labels; ground truth required")

    labels = np.column_stack([outputs[k].predicted_labels for k in POOL])
    ones = labels.sum(axis=1)
    data = np.empty((n, len(TABLE_COLUMNS)), dtype=np.float64)
    data[:, : len(WINDOW_COLUMNS)] = window_set.windows
    col = len(WINDOW_COLUMNS)
    for d, kind in enumerate(POOL):
        out = outputs[kind]
        # agreeing count: k ones for a 1-predictor, 6-k for a 0-predictor
        agree = np.where(labels[:, d] == 1, ones, N_DETECTORS - ones)
        if margin_on == "scaled":
            margin = out.scaled_scores - out.threshold
        else:
            raw = out.raw_scores
            lo, hi = raw.min(), raw.max()
            if hi == lo:
                raise SignalError(f"{kind} raw scores are constant; margin undefined")
            raw_threshold = lo + out.threshold * (hi - lo)
            margin = (raw - raw_threshold) / (hi - lo)
        data[:, col + 0] = agree / N_DETECTORS
        data[:, col + 1] = margin
        data[:, col + 2] = labels[:, d]
        data[:, col + 3] = out.scaled_scores
        data[:, col + 4] = out.threshold
        col += len(FEATURES_PER_DETECTOR)
    data[:, -1] = window_set.window_labels
    return SignalTable(columns=TABLE_COLUMNS, data=data)


def with_column(table: SignalTable, name, values) -> SignalTable:
    """New table with an extra column appended after the standard layout."""
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(table),):
        raise SignalError(f"column {name!r} has shape {values.shape}, expected ({len(table)},)")
    if name in table.columns:
        raise SignalError(f"column {name!r} already present")
    return SignalTable(
        columns=table.columns + (name,),
        data=np.column_stack([table.data, values]),
    )


def save_table_csv(path, table: SignalTable):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(table.columns)
        for row in table.data:
            writer.writerow([repr(float(v)) for v in row])


def load_table_csv(path) -> SignalTable:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = tuple(next(reader))
        except StopIteration:
            raise SignalError(f"{path}: empty file") from None
        if header[: len(TABLE_COLUMNS)] != TABLE_COLUMNS:
            raise SignalError(f"{path}: header does not start with the standard 37 columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SignalError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise SignalError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise SignalError(f"{path}: no data rows")
    return SignalTable(columns=header, data=np.asarray(rows, dtype=np.float64))
