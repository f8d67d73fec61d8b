"""Dynamic selection of unsupervised time-series anomaly detectors.

Six detectors score sliding windows of hourly consumption data, a
correctness classifier per detector stretches a 20% label budget over the
rest, and a DQN agent learns which detector to trust at each step.
Submodules: series, datasets, inject, detectors, signals, tsf, selector,
metrics, evalcli.
"""

__version__ = "0.1.0"

from . import datasets, detectors, inject, metrics, selector, series, signals, tsf

__all__ = [
    "datasets",
    "detectors",
    "inject",
    "metrics",
    "selector",
    "series",
    "signals",
    "tsf",
    "__version__",
]
