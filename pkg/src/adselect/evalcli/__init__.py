"""Metrics, experiment orchestration, reporting, and the command line."""

from ..metrics import ConfusionMatrix, EvalReport, MetricsError, confusion, metrics
from .config import (
    ConfigError,
    ExperimentConfig,
    config_hash,
    contamination_value,
    default_config,
    load_config,
    save_config,
    serialize_config,
)
from .experiment import StageError, run_experiment, run_stage, write_manifest
from .report import (
    ReportError,
    emit_report,
    format_report_text,
    read_report_csv,
    write_report_csv,
    write_report_txt,
)

__all__ = [
    "ConfusionMatrix",
    "EvalReport",
    "MetricsError",
    "confusion",
    "metrics",
    "ConfigError",
    "ExperimentConfig",
    "config_hash",
    "contamination_value",
    "default_config",
    "load_config",
    "save_config",
    "serialize_config",
    "StageError",
    "run_experiment",
    "run_stage",
    "write_manifest",
    "ReportError",
    "emit_report",
    "format_report_text",
    "read_report_csv",
    "write_report_csv",
    "write_report_txt",
]
