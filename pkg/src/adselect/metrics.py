"""Binary-classification metrics shared by detectors, classifiers and the selector."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np


class MetricsError(ValueError):
    pass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class EvalReport:
    """One evaluated run: who was scored, how well, and under what provenance."""

    run_id: str
    precision: float
    recall: float
    f1: float
    confusion: ConfusionMatrix
    config_hash: str = ""
    seed: int | None = None
    dataset_fingerprint: str = ""
    extra: dict = field(default_factory=dict)

    def as_row(self):
        row = {
            "run_id": self.run_id,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "tp": self.confusion.tp,
            "fp": self.confusion.fp,
            "tn": self.confusion.tn,
            "fn": self.confusion.fn,
            "config_hash": self.config_hash,
            "seed": "" if self.seed is None else self.seed,
            "dataset_fingerprint": self.dataset_fingerprint,
        }
        return row


def _as_binary(arr, name):
    out = np.asarray(arr)
    if out.ndim != 1 or len(out) == 0:
        raise MetricsError(f"{name} must be a non-empty 1-D array")
    out = out.astype(np.int64)
    if not np.isin(out, (0, 1)).all():
        raise MetricsError(f"{name} must contain only 0/1")
    return out


def confusion(predicted, truth) -> ConfusionMatrix:
    p = _as_binary(predicted, "predicted")
    t = _as_binary(truth, "truth")
    if len(p) != len(t):
        raise MetricsError(f"length mismatch: {len(p)} predicted vs {len(t)} truth")
    tp = int(np.sum((p == 1) & (t == 1)))
    fp = int(np.sum((p == 1) & (t == 0)))
    tn = int(np.sum((p == 0) & (t == 0)))
    fn = int(np.sum((p == 0) & (t == 1)))
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def precision_recall_f1(cm: ConfusionMatrix):
    # 0/0 resolves to 0 throughout
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def metrics(predicted, truth, run_id="", **provenance) -> EvalReport:
    """Score a 0/1 prediction vector against ground truth.

    Extra keyword arguments (config_hash, seed, dataset_fingerprint) are
    stored on the report for auditability.
    """
    cm = confusion(predicted, truth)
    precision, recall, f1 = precision_recall_f1(cm)
    return EvalReport(
        run_id=run_id,
        precision=precision,
        recall=recall,
        f1=f1,
        confusion=cm,
        **provenance,
    )


def report_to_dict(report: EvalReport) -> dict:
    return asdict(report)
