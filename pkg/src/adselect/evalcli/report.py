"""Report emission: metric tables as CSV and aligned text, plus training plots.

All serialization is deterministic: floats are repr'd, rows keep their
given order, and nothing embeds a timestamp, so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from ..metrics import ConfusionMatrix, EvalReport

REPORT_COLUMNS = (
    "run_id", "precision", "recall", "f1",
    "tp", "fp", "tn", "fn",
    "config_hash", "seed", "dataset_fingerprint",
)


class ReportError(ValueError):
    pass


def write_report_csv(path, reports):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for rep in reports:
            row = rep.as_row()
            writer.writerow([
                row["run_id"],
                repr(float(row["precision"])),
                repr(float(row["recall"])),
                repr(float(row["f1"])),
                row["tp"], row["fp"], row["tn"], row["fn"],
                row["config_hash"], row["seed"], row["dataset_fingerprint"],
            ])


def read_report_csv(path):
    reports = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != REPORT_COLUMNS:
            raise ReportError(f"{path}: unexpected report header")
        for row in reader:
            cm = ConfusionMatrix(tp=int(row["tp"]), fp=int(row["fp"]),
                                 tn=int(row["tn"]), fn=int(row["fn"]))
            reports.append(EvalReport(
                run_id=row["run_id"],
                precision=float(row["precision"]),
                recall=float(row["recall"]),
                f1=float(row["f1"]),
                confusion=cm,
                config_hash=row["config_hash"],
                seed=int(row["seed"]) if row["seed"] else None,
                dataset_fingerprint=row["dataset_fingerprint"],
            ))
    return reports


def format_report_text(reports) -> str:
    """Fixed-width model/precision/recall/F1 table."""
    if not reports:
        raise ReportError("no reports to format")
    name_width = max(5, max(len(r.run_id) for r in reports))
    lines = [f"{'model':<{name_width}}  {'precision':>9}  {'recall':>9}  {'f1':>9}"]
    lines.append("-" * len(lines[0]))
    for rep in reports:
        lines.append(
            f"{rep.run_id:<{name_width}}  {rep.precision:>9.3f}  {rep.recall:>9.3f}  {rep.f1:>9.3f}"
        )
    return "\n".join(lines) + "\n"


def write_report_txt(path, reports):
    with open(path, "w") as fh:
        fh.write(format_report_text(reports))


def read_training_log(path):
    """Parse a training log CSV into {step, epsilon, loss, episode_return} arrays."""
    steps, epsilons, losses, returns = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            steps.append(int(row["step"]))
            epsilons.append(float(row["epsilon"]))
            losses.append(float(row["loss"]) if row["loss"] else None)
            returns.append(float(row["episode_return"]) if row["episode_return"] else None)
    return steps, epsilons, losses, returns


def plot_training(log_path, out_path):
    steps, epsilons, _, returns = read_training_log(log_path)
    fig, (ax_eps, ax_ret) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    ax_eps.plot(steps, epsilons, color="tab:blue")
    ax_eps.set_ylabel("epsilon")
    ep_steps = [s for s, r in zip(steps, returns) if r is not None]
    ep_returns = [r for r in returns if r is not None]
    ax_ret.plot(ep_steps, ep_returns, color="tab:orange")
    ax_ret.set_ylabel("episode return")
    ax_ret.set_xlabel("step")
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Software": None})
    plt.close(fig)


def plot_f1_bars(reports, out_path):
    fig, ax = plt.subplots(figsize=(8, 4))
    names = [rep.run_id for rep in reports]
    ax.bar(names, [rep.f1 for rep in reports], color="tab:green")
    ax.set_ylabel("F1")
    ax.set_ylim(0, 1.05)
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Software": None})
    plt.close(fig)


def emit_report(reports, out_dir, formats=("csv", "txt"), training_log=None, plots=False):
    """Write the metric table (and optional plots); returns the written paths."""
    if not reports:
        raise ReportError("need at least one report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        path = out / "report.csv"
        write_report_csv(path, reports)
        written.append(path)
    if "txt" in formats:
        path = out / "report.txt"
        write_report_txt(path, reports)
        written.append(path)
    if plots:
        path = out / "f1_bars.png"
        plot_f1_bars(reports, path)
        written.append(path)
        if training_log is not None and Path(training_log).exists():
            path = out / "training.png"
            plot_training(training_log, path)
            written.append(path)
    return written
