"""Experiment orchestration: the staged pipeline behind `run` and the CLI.

Stages communicate through conventional file names inside one run
directory, so any stage can be re-run standalone on an existing directory
and the full pipeline is just the stages in order.  Every artifact is
hashed into a manifest for auditability; nothing records wall-clock time,
so a rerun with the same config and seeds is byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import pickle
from pathlib import Path

import numpy as np

from .. import detectors as det
from .. import inject as inj
from .. import selector as sel
from .. import signals as sig
from .. import tsf as tsflib
from ..datasets import synthetic_consumption
from ..metrics import metrics
from ..series import (
    TimeSeries,
    apply_scaler,
    fit_scaler,
    load_csv,
    load_windows_csv,
    make_windows,
    save_csv,
    save_windows_csv,
    ScalerSpec,
)
from .config import ExperimentConfig, config_hash, contamination_value, save_config
from .report import emit_report, read_report_csv, write_report_csv

MANIFEST_FORMAT = 1


class StageError(RuntimeError):
    """A pipeline stage failed; partial artifacts stay on disk."""

    def __init__(self, stage, cause):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


def _sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------- dataset

def stage_dataset(cfg: ExperimentConfig, run: Path):
    """Materialize normal.csv and either clean_test.csv or anomalous.csv."""
    normal_path = cfg.get("dataset", "normal_csv")
    anomalous_path = cfg.get("dataset", "anomalous_csv")
    if normal_path:
        normal = load_csv(normal_path)
        if anomalous_path:
            save_csv(normal, run / "normal.csv")
            save_csv(load_csv(anomalous_path), run / "anomalous.csv")
            return
        # a provided normal series with no test partner: synthesize the test tail
        raise StageError("dataset", ValueError(
            "normal_csv without anomalous_csv is not supported; provide both or neither"
        ))
    if anomalous_path:
        raise StageError("dataset", ValueError(
            "anomalous_csv without normal_csv is not supported; provide both or neither"
        ))
    n_normal = cfg.get("dataset", "synthetic_normal_hours")
    n_test = cfg.get("dataset", "synthetic_test_hours")
    full = synthetic_consumption(n_normal + n_test, seed=cfg.get("dataset", "synthetic_seed"))
    normal = TimeSeries(full.values[:n_normal], full.timestamps[:n_normal])
    clean_test = TimeSeries(full.values[n_normal:], full.timestamps[n_normal:])
    save_csv(normal, run / "normal.csv")
    save_csv(clean_test, run / "clean_test.csv")


def stage_inject(cfg: ExperimentConfig, run: Path):
    if (run / "anomalous.csv").exists():
        return  # a labeled series was supplied directly
    clean = load_csv(run / "clean_test.csv")
    plan = injection_plan(cfg)
    save_csv(inj.inject(clean, plan), run / "anomalous.csv")


def injection_plan(cfg: ExperimentConfig) -> inj.InjectionPlan:
    return inj.InjectionPlan(
        kind=cfg.get("inject", "kind"),
        rate=cfg.get("inject", "rate"),
        seed=cfg.get("inject", "seed"),
        global_u=(cfg.get("inject", "global_u_min"), cfg.get("inject", "global_u_max")),
        local_k=(cfg.get("inject", "local_k_min"), cfg.get("inject", "local_k_max")),
        cluster_len=(cfg.get("inject", "cluster_len_min"), cfg.get("inject", "cluster_len_max")),
    )


# ------------------------------------------------------------ scale/window

def stage_scale(cfg: ExperimentConfig, run: Path):
    normal = load_csv(run / "normal.csv")
    spec = fit_scaler(normal, cfg.get("dataset", "scaler"))
    _write_json(run / "scaler.json", {"kind": spec.kind, "min": spec.min, "max": spec.max})


def _load_scaler(run: Path) -> ScalerSpec:
    blob = _read_json(run / "scaler.json")
    return ScalerSpec(kind=blob["kind"], min=blob["min"], max=blob["max"])


def stage_window(cfg: ExperimentConfig, run: Path):
    spec = _load_scaler(run)
    length = cfg.get("window", "length")
    step = cfg.get("window", "step")
    rule = cfg.get("window", "label_rule")
    max_gap = cfg.get("window", "max_gap_hours")
    for name, out_name in (("normal.csv", "normal_windows.csv"),
                           ("anomalous.csv", "anomalous_windows.csv")):
        ts = load_csv(run / name)
        scaled = TimeSeries(apply_scaler(spec, ts.values), ts.timestamps, ts.labels)
        ws = make_windows(scaled, length, step, label_rule=rule, max_gap_hours=max_gap)
        save_windows_csv(ws, run / out_name)


# --------------------------------------------------------------- detectors

def detector_params(cfg: ExperimentConfig, kind) -> dict:
    seed = cfg.get("detectors", "seed")
    if kind == "knn":
        return {"n_neighbors": cfg.get("detectors", "knn_n_neighbors"),
                "method": cfg.get("detectors", "knn_method")}
    if kind == "osvm":
        return {"nu": cfg.get("detectors", "osvm_nu")}
    if kind == "iforest":
        return {"n_estimators": cfg.get("detectors", "iforest_n_estimators"),
                "max_features": cfg.get("detectors", "iforest_max_features"),
                "seed": seed}
    if kind == "usad":
        return {"n_epochs": cfg.get("detectors", "usad_epochs"), "seed": seed}
    return {}


def resolve_contamination(cfg: ExperimentConfig, window_labels) -> float:
    labels = np.asarray(window_labels)
    true_rate = float(labels.sum()) / len(labels) if len(labels) else None
    return contamination_value(cfg, true_rate)


def stage_detectors(cfg: ExperimentConfig, run: Path):
    normal_ws = load_windows_csv(run / "normal_windows.csv")
    anomalous_ws = load_windows_csv(run / "anomalous_windows.csv")
    contamination = resolve_contamination(cfg, anomalous_ws.window_labels)
    tuned = cfg.tuned_kinds()
    budget = cfg.get("detectors", "tune_budget") or None
    seed = cfg.get("detectors", "seed")

    hyperparams = {}
    thresholds = {}
    for kind in det.POOL:
        params = detector_params(cfg, kind)
        if kind in tuned:
            best = det.tune(kind, normal_ws.windows, anomalous_ws.windows,
                            anomalous_ws.window_labels, budget=budget,
                            contamination=contamination, seed=seed)
            params.update(best)
        model = det.fit(kind, normal_ws.windows, **params)
        out = det.threshold_and_label(model.score(anomalous_ws.windows), contamination)
        det.save_model(model, run / f"model_{kind}.pkl")
        det.save_scores_csv(run / f"scores_{kind}.csv", out)
        hyperparams[kind] = {k: v for k, v in params.items()}
        thresholds[kind] = out.threshold
    _write_json(run / "hyperparams.json", hyperparams)
    _write_json(run / "thresholds.json", {"contamination": contamination, **thresholds})


def _read_scores(path):
    idx, raw, scaled, labels = [], [], [], []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            idx.append(int(row["window_index"]))
            raw.append(float(row["raw"]))
            scaled.append(float(row["scaled"]))
            labels.append(int(row["label"]))
    return (np.asarray(raw), np.asarray(scaled), np.asarray(labels, dtype=np.int64))


def _load_outputs(run: Path) -> dict:
    blob = _read_json(run / "thresholds.json")
    outputs = {}
    for kind in det.POOL:
        raw, scaled, labels = _read_scores(run / f"scores_{kind}.csv")
        outputs[kind] = det.DetectorOutput(
            raw_scores=raw, scaled_scores=scaled,
            threshold=float(blob[kind]), predicted_labels=labels,
        )
    return outputs


# ----------------------------------------------------------------- signals

def stage_signals(cfg: ExperimentConfig, run: Path):
    anomalous_ws = load_windows_csv(run / "anomalous_windows.csv")
    table = sig.assemble(anomalous_ws, _load_outputs(run))
    sig.save_table_csv(run / "signals.csv", table)


# --------------------------------------------------------------------- tsf

def stage_tsf(cfg: ExperimentConfig, run: Path):
    table = sig.load_table_csv(run / "signals.csv")
    train_idx, test_idx = tsflib.stratified_indices(
        table.ground_truth,
        train_frac=cfg.get("tsf", "train_frac"),
        seed=cfg.get("tsf", "seed"),
    )
    _write_json(run / "split.json", {"train": [int(i) for i in train_idx],
                                     "test": [int(i) for i in test_idx]})
    predictions = np.zeros((len(table), len(det.POOL)), dtype=np.int64)
    tsf_reports = []
    for d, kind in enumerate(det.POOL):
        ds = tsflib.build_dataset(table, kind)
        model = tsflib.fit_tsf(
            ds.subset(train_idx),
            n_trees=cfg.get("tsf", "n_trees"),
            min_interval=cfg.get("tsf", "min_interval"),
            seed=cfg.get("tsf", "seed"),
        )
        tsflib.save_tsf(model, run / f"tsf_{kind}.json")
        predictions[:, d] = model.predict(ds.features)
        test_ds = ds.subset(test_idx)
        tsf_reports.append(metrics(predictions[test_idx, d], test_ds.target,
                                   run_id=f"tsf_{kind}", seed=cfg.get("tsf", "seed"),
                                   config_hash=config_hash(cfg)))
    with open(run / "tsf_predictions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["window_index", *det.POOL])
        for i, row in enumerate(predictions):
            writer.writerow([i, *[int(v) for v in row]])
    write_report_csv(run / "tsf_report.csv", tsf_reports)


def _load_tsf_predictions(run: Path) -> np.ndarray:
    rows = []
    with open(run / "tsf_predictions.csv", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.append([int(row[kind]) for kind in det.POOL])
    return np.asarray(rows, dtype=np.int64)


# ---------------------------------------------------------------- selector

def reward_spec(cfg: ExperimentConfig) -> sel.RewardSpec:
    return sel.RewardSpec.named(cfg.get("selector", "reward"), mode=cfg.get("selector", "mode"))


def epsilon_schedule(cfg: ExperimentConfig) -> sel.EpsilonSchedule:
    kind = cfg.get("selector", "epsilon")
    if kind == "constant":
        return sel.EpsilonSchedule(kind="constant", value=cfg.get("selector", "epsilon_value"))
    return sel.EpsilonSchedule(
        kind="decaying",
        start=cfg.get("selector", "epsilon_start"),
        end=cfg.get("selector", "epsilon_end"),
        fraction=cfg.get("selector", "epsilon_fraction"),
    )


def _build_env(cfg: ExperimentConfig, run: Path) -> sel.SelectionEnv:
    table = sig.load_table_csv(run / "signals.csv")
    split = _read_json(run / "split.json")
    gt_mask = np.zeros(len(table), dtype=np.int64)
    gt_mask[np.asarray(split["train"], dtype=np.int64)] = 1
    return sel.SelectionEnv(
        table,
        tsf_predictions=_load_tsf_predictions(run),
        gt_mask=gt_mask,
        reward_spec=reward_spec(cfg),
    )


def stage_rl_train(cfg: ExperimentConfig, run: Path):
    env = _build_env(cfg, run)
    policy = sel.DqnPolicy(sel.DqnConfig(
        replay_capacity=cfg.get("selector", "replay_capacity"),
        batch_size=cfg.get("selector", "batch_size"),
        lr=cfg.get("selector", "lr"),
        target_sync=cfg.get("selector", "target_sync"),
        seed=cfg.get("selector", "seed"),
    ))
    log = sel.train(env, policy, cfg.get("selector", "total_steps"), epsilon_schedule(cfg))
    sel.save_policy(policy, run / "policy.pt", config_hash=config_hash(cfg))
    log.save_csv(run / "training_log.csv")


def stage_evaluate(cfg: ExperimentConfig, run: Path):
    env = _build_env(cfg, run)
    policy = sel.load_policy(run / "policy.pt")
    actions, labels = sel.evaluate(env, policy)
    sel.save_evaluation_csv(run / "evaluation.csv", actions, labels)

    fingerprint = _sha256_file(run / "anomalous.csv")
    provenance = {"config_hash": config_hash(cfg), "dataset_fingerprint": fingerprint}
    truth = env.truth
    reports = []
    outputs = _load_outputs(run)
    for kind in det.POOL:
        reports.append(metrics(outputs[kind].predicted_labels, truth, run_id=kind,
                               seed=cfg.get("detectors", "seed"), **provenance))
    reports.append(metrics(labels, truth, run_id="selector",
                           seed=cfg.get("selector", "seed"), **provenance))
    write_report_csv(run / "report.csv", reports)


def stage_report(cfg: ExperimentConfig, run: Path):
    reports = read_report_csv(run / "report.csv")
    emit_report(reports, run, formats=("txt",), plots=cfg.get("output", "plots"),
                training_log=run / "training_log.csv")


# ---------------------------------------------------------------- manifest

def write_manifest(cfg: ExperimentConfig, run: Path):
    files = {}
    for path in sorted(run.iterdir()):
        if path.name == "manifest.json" or not path.is_file():
            continue
        files[path.name] = _sha256_file(path)
    inputs = {}
    for key in ("normal_csv", "anomalous_csv"):
        value = cfg.get("dataset", key)
        if value:
            inputs[value] = _sha256_file(value)
    _write_json(run / "manifest.json", {
        "format_version": MANIFEST_FORMAT,
        "config_hash": config_hash(cfg),
        "inputs": inputs,
        "files": files,
    })


STAGES = (
    ("dataset", stage_dataset),
    ("inject", stage_inject),
    ("scale", stage_scale),
    ("window", stage_window),
    ("detectors", stage_detectors),
    ("signals", stage_signals),
    ("tsf", stage_tsf),
    ("rl-train", stage_rl_train),
    ("evaluate", stage_evaluate),
    ("report", stage_report),
)

STAGE_BY_NAME = dict(STAGES)


def run_stage(cfg: ExperimentConfig, run_dir, name):
    """Run one named stage against an existing run directory."""
    if name not in STAGE_BY_NAME:
        raise StageError(name, ValueError(f"unknown stage; expected one of {list(STAGE_BY_NAME)}"))
    run = Path(run_dir)
    run.mkdir(parents=True, exist_ok=True)
    try:
        STAGE_BY_NAME[name](cfg, run)
    except StageError:
        write_manifest(cfg, run)
        raise
    except Exception as exc:
        write_manifest(cfg, run)
        raise StageError(name, exc) from exc
    write_manifest(cfg, run)


def run_experiment(cfg: ExperimentConfig, run_dir=None):
    """Full pipeline; returns the final per-model reports."""
    run = Path(run_dir) if run_dir is not None else Path(cfg.get("output", "dir"))
    run.mkdir(parents=True, exist_ok=True)
    save_config(cfg, run / "config.ini")
    for name, fn in STAGES:
        try:
            fn(cfg, run)
        except StageError:
            write_manifest(cfg, run)
            raise
        except Exception as exc:
            write_manifest(cfg, run)
            raise StageError(name, exc) from exc
    write_manifest(cfg, run)
    return read_report_csv(run / "report.csv")


def save_pipeline_model(path, model, scaler: ScalerSpec, window_length, window_step):
    """Standalone-fit blob: detector plus the preprocessing it expects."""
    blob = {
        "format_version": 1,
        "kind": model.kind,
        "model": model,
        "scaler": {"kind": scaler.kind, "min": scaler.min, "max": scaler.max},
        "window_length": int(window_length),
        "window_step": int(window_step),
    }
    with open(path, "wb") as fh:
        pickle.dump(blob, fh)


def load_pipeline_model(path):
    with open(path, "rb") as fh:
        blob = pickle.load(fh)
    if not isinstance(blob, dict) or blob.get("format_version") != 1:
        raise ValueError(f"unrecognized model file {path}")
    scaler = ScalerSpec(**blob["scaler"])
    return blob["model"], scaler, blob["window_length"], blob["window_step"]
