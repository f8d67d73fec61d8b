"""Command-line surface over the pipeline stages.

Exit codes: 0 on success, 1 on usage errors (bad flags or values), 2 when
a stage fails mid-run.  File-level commands (inject, fit, score,
threshold) work on explicit input/output paths; the later stages share a
run directory laid out by `run` or by the earlier stages.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .. import detectors as det
from ..inject import InjectionPlan, inject
from ..series import TimeSeries, apply_scaler, fit_scaler, load_csv, make_windows, save_csv
from .config import ConfigError, default_config, load_config, save_config
from .experiment import (
    StageError,
    load_pipeline_model,
    run_experiment,
    run_stage,
    save_pipeline_model,
)
from .report import format_report_text


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; the contract here reserves 2 for stage
    # failures, so usage problems are rethrown and mapped to exit 1
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _parse_hyper(pairs):
    out = {}
    for pair in pairs or ():
        if "=" not in pair:
            raise UsageError(f"--hyper expects key=value, got {pair!r}")
        key, raw = pair.split("=", 1)
        for cast in (int, float):
            try:
                out[key] = cast(raw)
                break
            except ValueError:
                continue
        else:
            out[key] = raw
    return out


def _config_for_run_dir(args):
    cfg_path = Path(args.run_dir) / "config.ini"
    cfg = load_config(cfg_path) if cfg_path.exists() else default_config()
    for pair in getattr(args, "set", None) or ():
        if "=" not in pair or "." not in pair.split("=", 1)[0]:
            raise UsageError(f"--set expects section.key=value, got {pair!r}")
        dotted, value = pair.split("=", 1)
        section, key = dotted.split(".", 1)
        try:
            cfg.set(section.strip(), key.strip(), value)
        except ConfigError as exc:
            raise UsageError(str(exc)) from None
    return cfg


def _add_run_dir_command(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--run-dir", required=True, help="experiment directory")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a config entry (repeatable)")
    return p


def build_parser() -> _Parser:
    parser = _Parser(prog="adselect", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("inject", help="inject labeled anomalies into a clean series")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--kind", default="mixed", choices=["global", "local", "clustered", "mixed"])
    p.add_argument("--rate", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--global-u", nargs=2, type=float, default=(0.1, 0.5), metavar=("LO", "HI"))
    p.add_argument("--local-k", nargs=2, type=float, default=(3.0, 5.0), metavar=("LO", "HI"))
    p.add_argument("--cluster-len", nargs=2, type=int, default=(4, 6), metavar=("MIN", "MAX"))

    p = sub.add_parser("fit", help="fit one detector on a normal series")
    p.add_argument("--train", required=True, help="normal series CSV")
    p.add_argument("--kind", required=True, choices=list(det.POOL))
    p.add_argument("--model", required=True, help="output model path")
    p.add_argument("--scaler", default="minmax", choices=["minmax", "log"])
    p.add_argument("--window-length", type=int, default=6)
    p.add_argument("--window-step", type=int, default=1)
    p.add_argument("--hyper", action="append", metavar="KEY=VALUE")

    p = sub.add_parser("score", help="raw anomaly scores for a series")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="series CSV to score")
    p.add_argument("--output", required=True, help="output CSV window_index,raw")

    p = sub.add_parser("threshold", help="scale scores and label the top fraction")
    p.add_argument("--scores", required=True, help="CSV with a raw column")
    p.add_argument("--contamination", type=float, required=True)
    p.add_argument("--output", required=True)

    _add_run_dir_command(sub, "signals", "assemble the signal table from detector outputs")
    p = _add_run_dir_command(sub, "tsf-train", "train the per-detector correctness classifiers")
    p = _add_run_dir_command(sub, "rl-train", "train the DQN selector")
    p.add_argument("--reward", choices=["Original", "R1", "R2", "AdapInc", "AdapDec"])
    p.add_argument("--mode", choices=["mixed", "gtruth_only", "class_only"])
    p.add_argument("--epsilon", choices=["decaying", "constant"])
    p.add_argument("--total-steps", type=int)
    p.add_argument("--seed", type=int)
    _add_run_dir_command(sub, "evaluate", "greedy selector pass plus metric table")
    p = _add_run_dir_command(sub, "report", "format tables and plots from a finished run")
    p.add_argument("--plots", action="store_true", default=None)
    p.add_argument("--no-plots", dest="plots", action="store_false")

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--run-dir", help="override [output] dir")
    return parser


def _cmd_inject(args) -> int:
    ts = load_csv(args.input)
    plan = InjectionPlan(kind=args.kind, rate=args.rate, seed=args.seed,
                         global_u=tuple(args.global_u), local_k=tuple(args.local_k),
                         cluster_len=tuple(args.cluster_len))
    save_csv(inject(ts, plan), args.output)
    print(f"wrote {args.output}")
    return 0


def _cmd_fit(args) -> int:
    ts = load_csv(args.train)
    scaler = fit_scaler(ts, args.scaler)
    scaled = TimeSeries(apply_scaler(scaler, ts.values), ts.timestamps, ts.labels)
    ws = make_windows(scaled, args.window_length, args.window_step)
    model = det.fit(args.kind, ws.windows, **_parse_hyper(args.hyper))
    save_pipeline_model(args.model, model, scaler, args.window_length, args.window_step)
    print(f"wrote {args.model}")
    return 0


def _cmd_score(args) -> int:
    model, scaler, length, step = load_pipeline_model(args.model)
    ts = load_csv(args.data)
    scaled = TimeSeries(apply_scaler(scaler, ts.values), ts.timestamps, ts.labels)
    ws = make_windows(scaled, length, step)
    raw = model.score(ws.windows)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_index", "raw"])
        for i, value in enumerate(raw):
            writer.writerow([i, repr(float(value))])
    print(f"wrote {args.output}")
    return 0


def _cmd_threshold(args) -> int:
    raw = []
    with open(args.scores, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "raw" not in reader.fieldnames:
            raise UsageError(f"{args.scores}: no 'raw' column")
        for row in reader:
            raw.append(float(row["raw"]))
    out = det.threshold_and_label(np.asarray(raw), args.contamination)
    det.save_scores_csv(args.output, out)
    print(f"threshold {out.threshold!r}, {int(out.predicted_labels.sum())} windows labeled")
    return 0


def _cmd_run_dir_stage(args, stage) -> int:
    cfg = _config_for_run_dir(args)
    if stage == "rl-train":
        for flag, entry in (("reward", "reward"), ("mode", "mode"), ("epsilon", "epsilon"),
                            ("total_steps", "total_steps"), ("seed", "seed")):
            value = getattr(args, flag)
            if value is not None:
                cfg.set("selector", entry, str(value))
    if stage == "report" and args.plots is not None:
        cfg.set("output", "plots", "true" if args.plots else "false")
    run_stage(cfg, args.run_dir, stage)
    save_config(cfg, Path(args.run_dir) / "config.ini")
    print(f"stage {stage} done in {args.run_dir}")
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    reports = run_experiment(cfg, run_dir=args.run_dir)
    print(format_report_text(reports), end="")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (see --help)")
        if args.command == "inject":
            return _cmd_inject(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "score":
            return _cmd_score(args)
        if args.command == "threshold":
            return _cmd_threshold(args)
        if args.command in ("signals", "tsf-train", "rl-train", "evaluate", "report"):
            stage = {"tsf-train": "tsf"}.get(args.command, args.command)
            return _cmd_run_dir_stage(args, stage)
        if args.command == "run":
            return _cmd_run(args)
        raise UsageError(f"unknown command {args.command!r}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # any other failure counts as a stage failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
