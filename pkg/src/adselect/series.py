"""Hourly consumption series: CSV ingestion, scaling, sliding windows.

The pipeline keeps two partitions of the same meter: a clean partition used
to fit detectors (and the min-max scaler) and a labelled partition used for
scoring.  Windowing turns both into fixed-length vectors with a per-window
ground-truth label.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "TimeSeries",
    "ScalerSpec",
    "WindowSet",
    "SeriesError",
    "load_csv",
    "save_csv",
    "fit_scaler",
    "apply_scaler",
    "invert_scaler",
    "make_windows",
    "window_count",
    "save_windows_csv",
    "load_windows_csv",
]

WINDOW_LENGTH = 6
WINDOW_STEP = 1


class SeriesError(ValueError):
    """Malformed input data or an operation precondition violation."""


@dataclass(frozen=True)
class TimeSeries:
    """An hourly consumption series with optional point labels.

    Parameters
    ----------
    values : np.ndarray
        Consumption readings, finite floats.
    timestamps : np.ndarray or None
        Hourly instants (``datetime64[s]``), strictly increasing.  ``None``
        for purely synthetic index-based series.  Jumps larger than one hour
        are kept as documented gaps (rows are dropped, never filled).
    labels : np.ndarray or None
        Per-point ``{0, 1}`` ground truth, same length as ``values``.
    """

    values: np.ndarray
    timestamps: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise SeriesError("values must be one-dimensional")
        if not np.all(np.isfinite(values)):
            raise SeriesError("values must be finite")
        object.__setattr__(self, "values", values)
        if self.timestamps is not None:
            ts = np.asarray(self.timestamps, dtype="datetime64[s]")
            if ts.shape != values.shape:
                raise SeriesError("timestamps length must equal values length")
            if len(ts) > 1 and not np.all(np.diff(ts) > np.timedelta64(0, "s")):
                raise SeriesError("timestamps must be strictly increasing")
            object.__setattr__(self, "timestamps", ts)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=np.int8)
            if labels.shape != values.shape:
                raise SeriesError("labels length must equal values length")
            if not np.isin(labels, (0, 1)).all():
                raise SeriesError("labels must be 0 or 1")
            object.__setattr__(self, "labels", labels)

    def __len__(self):
        return len(self.values)

    def gap_hours(self) -> Optional[np.ndarray]:
        """Spacing to the previous point in hours (``None`` if no timestamps)."""
        if self.timestamps is None:
            return None
        return np.diff(self.timestamps).astype("timedelta64[s]").astype(np.int64) / 3600.0

    def with_labels(self, labels: np.ndarray) -> "TimeSeries":
        return TimeSeries(self.values, self.timestamps, labels)


@dataclass(frozen=True)
class ScalerSpec:
    """Value scaling fitted on the clean partition and reused unchanged.

    ``minmax`` stores the clean partition's min/max; applying it to other
    data may produce values outside [0, 1] (no clamping).  ``log`` is the
    stateless ``log1p`` transform, defined for values > -1.
    """

    kind: str
    min: float = 0.0
    max: float = 1.0

    def __post_init__(self):
        if self.kind not in ("minmax", "log"):
            raise SeriesError(f"unknown scaler kind {self.kind!r}")
        if self.kind == "minmax" and not self.max > self.min:
            raise SeriesError("minmax scaler requires max > min")


@dataclass(frozen=True)
class WindowSet:
    """Sliding-window view of a series.

    ``windows`` has shape ``(n, W)``; ``origin_index`` maps each window back
    to the raw index of its first point.  ``window_labels`` aggregates point
    labels per the chosen rule (all zeros when the source is unlabelled).
    """

    windows: np.ndarray
    window_labels: np.ndarray
    origin_index: np.ndarray

    def __post_init__(self):
        windows = np.asarray(self.windows, dtype=np.float64)
        labels = np.asarray(self.window_labels, dtype=np.int8)
        origin = np.asarray(self.origin_index, dtype=np.int64)
        if windows.ndim != 2:
            raise SeriesError("windows must be two-dimensional")
        if len(labels) != len(windows) or len(origin) != len(windows):
            raise SeriesError("window_labels/origin_index must match window count")
        object.__setattr__(self, "windows", windows)
        object.__setattr__(self, "window_labels", labels)
        object.__setattr__(self, "origin_index", origin)

    def __len__(self):
        return len(self.windows)

    @property
    def width(self) -> int:
        return self.windows.shape[1]


def load_csv(path, *, timestamp_col="timestamp", value_col="value", label_col="label") -> TimeSeries:
    """Parse a ``timestamp,value[,label]`` CSV into a :class:`TimeSeries`.

    Rows whose value field is blank are dropped.  Malformed timestamps or
    non-numeric values raise :class:`SeriesError` with the offending row
    number (1-based, counting the header).
    """
    timestamps, values, labels = [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or timestamp_col not in reader.fieldnames:
            raise SeriesError(f"{path}: missing required column {timestamp_col!r}")
        if value_col not in reader.fieldnames:
            raise SeriesError(f"{path}: missing required column {value_col!r}")
        has_labels = label_col in reader.fieldnames
        for lineno, row in enumerate(reader, start=2):
            raw_value = (row[value_col] or "").strip()
            if raw_value == "":
                continue
            try:
                ts = np.datetime64(row[timestamp_col].strip(), "s")
            except ValueError:
                raise SeriesError(f"{path}:{lineno}: malformed timestamp {row[timestamp_col]!r}") from None
            try:
                value = float(raw_value)
            except ValueError:
                raise SeriesError(f"{path}:{lineno}: non-numeric value {raw_value!r}") from None
            timestamps.append(ts)
            values.append(value)
            if has_labels:
                raw_label = (row[label_col] or "").strip()
                labels.append(int(raw_label) if raw_label else 0)
    if not values:
        raise SeriesError(f"{path}: no usable rows")
    return TimeSeries(
        np.array(values),
        np.array(timestamps, dtype="datetime64[s]"),
        np.array(labels, dtype=np.int8) if has_labels else None,
    )


def save_csv(ts: TimeSeries, path) -> None:
    """Write a series back out in the ``timestamp,value[,label]`` format."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["timestamp", "value"] + (["label"] if ts.labels is not None else [])
        writer.writerow(header)
        for i in range(len(ts)):
            stamp = str(ts.timestamps[i]) if ts.timestamps is not None else str(i)
            row = [stamp, repr(float(ts.values[i]))]
            if ts.labels is not None:
                row.append(int(ts.labels[i]))
            writer.writerow(row)


def fit_scaler(ts: TimeSeries, kind: str = "minmax") -> ScalerSpec:
    """Fit a scaler on a series (the clean partition in the pipeline)."""
    if len(ts) == 0:
        raise SeriesError("cannot fit a scaler on an empty series")
    if kind == "minmax":
        lo, hi = float(ts.values.min()), float(ts.values.max())
        if hi <= lo:
            raise SeriesError("degenerate scale: constant series under minmax")
        return ScalerSpec("minmax", lo, hi)
    if kind == "log":
        if np.any(ts.values <= -1.0):
            raise SeriesError("log scaling requires all values > -1")
        return ScalerSpec("log")
    raise SeriesError(f"unknown scaler kind {kind!r}")


def apply_scaler(spec: ScalerSpec, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if spec.kind == "minmax":
        return (values - spec.min) / (spec.max - spec.min)
    if np.any(values <= -1.0):
        raise SeriesError("log scaling requires all values > -1")
    return np.log1p(values)


def invert_scaler(spec: ScalerSpec, scaled: np.ndarray) -> np.ndarray:
    scaled = np.asarray(scaled, dtype=np.float64)
    if spec.kind == "minmax":
        return scaled * (spec.max - spec.min) + spec.min
    return np.expm1(scaled)


def window_count(n: int, length: int = WINDOW_LENGTH, step: int = WINDOW_STEP) -> int:
    """Number of sliding windows over ``n`` points: floor((n - W) / S) + 1."""
    if n < length:
        return 0
    return (n - length) // step + 1


def make_windows(
    ts: TimeSeries,
    length: int = WINDOW_LENGTH,
    step: int = WINDOW_STEP,
    *,
    label_rule: str = "any",
    max_gap_hours: float = 6.0,
) -> WindowSet:
    """Slide a fixed-length window over the series.

    Parameters
    ----------
    label_rule : {"any", "last", "majority"}
        ``any`` marks a window anomalous when at least one covered point is
        (the default, so no anomaly is masked); ``last`` uses the final
        point only; ``majority`` requires more than half.
    max_gap_hours : float
        Windows that straddle a timestamp gap larger than this are dropped,
        so a window never mixes readings from both sides of an outage.
    """
    n = len(ts)
    if length < 1 or step < 1:
        raise SeriesError("window length and step must be >= 1")
    if n < length:
        raise SeriesError(f"insufficient data: {n} points for window length {length}")
    if label_rule not in ("any", "last", "majority"):
        raise SeriesError(f"unknown label_rule {label_rule!r}")

    count = window_count(n, length, step)
    origins = np.arange(count, dtype=np.int64) * step
    idx = origins[:, None] + np.arange(length)
    windows = ts.values[idx]

    if ts.labels is not None:
        point = ts.labels[idx]
        if label_rule == "any":
            labels = point.max(axis=1)
        elif label_rule == "last":
            labels = point[:, -1]
        else:
            labels = (point.sum(axis=1) * 2 > length).astype(np.int8)
    else:
        labels = np.zeros(count, dtype=np.int8)

    gaps = ts.gap_hours()
    if gaps is not None and np.any(gaps > max_gap_hours):
        # gaps[i] is the spacing between raw points i and i+1
        bad_steps = np.flatnonzero(gaps > max_gap_hours)
        straddles = np.zeros(count, dtype=bool)
        for b in bad_steps:
            straddles |= (origins <= b) & (b < origins + length - 1)
        keep = ~straddles
        windows, labels, origins = windows[keep], labels[keep], origins[keep]

    return WindowSet(windows, labels, origins)


def save_windows_csv(ws: WindowSet, path) -> None:
    """Export as ``origin_index,w0..w{W-1},label`` rows."""
    width = ws.width
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["origin_index"] + [f"w{i}" for i in range(width)] + ["label"])
        for i in range(len(ws)):
            writer.writerow(
                [int(ws.origin_index[i])]
                + [repr(float(v)) for v in ws.windows[i]]
                + [int(ws.window_labels[i])]
            )


def load_windows_csv(path) -> WindowSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "origin_index" or header[-1] != "label":
            raise SeriesError(f"{path}: not a window export (header {header[:2]}...)")
        width = len(header) - 2
        origins, rows, labels = [], [], []
        for row in reader:
            origins.append(int(row[0]))
            rows.append([float(v) for v in row[1 : 1 + width]])
            labels.append(int(row[-1]))
    if not rows:
        raise SeriesError(f"{path}: no windows")
    return WindowSet(np.array(rows), np.array(labels, dtype=np.int8), np.array(origins))
