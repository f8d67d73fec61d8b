"""Anomaly injection with exact ground truth.

Three point-anomaly flavours plus a mixed blend:

* global    - values pushed strictly outside the clean series' min/max range
* local     - values kept inside the global range but displaced by at least
              ``k_min`` standard deviations of their 24-hour neighbourhood
* clustered - contiguous runs of local-style shifts sharing one direction

All randomness comes from the plan's seed; identical ``(series, plan)``
inputs give identical output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .series import TimeSeries

__all__ = ["InjectionPlan", "InjectionError", "inject", "NEIGHBORHOOD_HOURS", "EDGE_MARGIN"]

NEIGHBORHOOD_HOURS = 24  # one daily cycle, centred on the point
EDGE_MARGIN = 24  # keep first/last day untouched so neighbourhoods stay well-defined

KINDS = ("global", "local", "clustered", "mixed")


class InjectionError(ValueError):
    """Infeasible plan or unusable input series."""


@dataclass(frozen=True)
class InjectionPlan:
    """How many anomalies to inject, of which kind, and how strong.

    Parameters
    ----------
    kind : {"global", "local", "clustered", "mixed"}
    rate : float
        Fraction of points to label anomalous; ``round(rate * N)`` total.
    seed : int
    global_u : (float, float)
        Overshoot range beyond the clean min/max, as a fraction of the
        clean range.
    local_k : (float, float)
        Neighbourhood-sigma multiplier range; the low end is the hard
        floor every local point must clear.
    cluster_len : (int, int)
        Admissible contiguous run lengths for the clustered kind.
    """

    kind: str
    rate: float
    seed: int = 0
    global_u: Tuple[float, float] = (0.1, 0.5)
    local_k: Tuple[float, float] = (3.0, 5.0)
    cluster_len: Tuple[int, int] = (4, 6)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InjectionError(f"unknown injection kind {self.kind!r}")
        if not 0.0 < self.rate < 1.0:
            raise InjectionError("rate must be in (0, 1)")
        cmin, cmax = self.cluster_len
        if cmin < 1 or cmax < cmin:
            raise InjectionError("cluster_len must satisfy 1 <= min <= max")


def inject(ts: TimeSeries, plan: InjectionPlan) -> TimeSeries:
    """Return a labelled copy of ``ts`` with ``round(rate*N)`` injected points."""
    if ts.labels is not None and ts.labels.any():
        raise InjectionError("series already carries anomaly labels")
    n = len(ts)
    budget = int(round(plan.rate * n))
    if budget < 1:
        raise InjectionError(f"rate {plan.rate} yields no anomalies for {n} points")
    if n < 2 * EDGE_MARGIN + budget:
        raise InjectionError("series too short for the requested injection")

    rng = np.random.default_rng(plan.seed)
    values = ts.values.copy()
    labels = np.zeros(n, dtype=np.int8)
    clean = ts.values  # all statistics come from the untouched series
    gmin, gmax = float(clean.min()), float(clean.max())
    grange = gmax - gmin
    if grange <= 0:
        raise InjectionError("constant series cannot be injected")

    if plan.kind == "mixed":
        parts = (budget // 3, budget // 3, budget - 2 * (budget // 3))
    else:
        parts = {"global": (budget, 0, 0), "local": (0, budget, 0), "clustered": (0, 0, budget)}[plan.kind]
    n_global, n_local, n_cluster = parts

    taken = np.zeros(n, dtype=bool)
    taken[:EDGE_MARGIN] = True
    taken[n - EDGE_MARGIN :] = True

    if n_cluster:
        _inject_clustered(values, labels, taken, clean, gmin, gmax, n_cluster, plan, rng)
    if n_global:
        _inject_global(values, labels, taken, gmin, gmax, grange, n_global, plan, rng)
    if n_local:
        _inject_local(values, labels, taken, clean, gmin, gmax, n_local, plan, rng)

    assert int(labels.sum()) == budget
    return TimeSeries(values, ts.timestamps, labels)


def _draw_positions(taken, count, rng):
    free = np.flatnonzero(~taken)
    if len(free) < count:
        raise InjectionError("not enough free positions for the injection budget")
    return rng.choice(free, size=count, replace=False)


def _inject_global(values, labels, taken, gmin, gmax, grange, count, plan, rng):
    positions = _draw_positions(taken, count, rng)
    u = rng.uniform(plan.global_u[0], plan.global_u[1], size=count)
    below = rng.random(count) < 0.5
    values[positions] = np.where(below, gmin - u * grange, gmax + u * grange)
    labels[positions] = 1
    taken[positions] = True


def _neighborhood_stats(clean, i):
    half = NEIGHBORHOOD_HOURS // 2
    neigh = np.concatenate([clean[i - half : i], clean[i + 1 : i + half + 1]])
    return float(neigh.mean()), float(neigh.std())


def _local_value(x, mu, sd, gmin, gmax, k_lo, k_hi, rng):
    """Pick x +/- k*sd that lands inside (gmin, gmax) and >= k_lo sd from mu.

    Returns None when no direction admits a compliant value at this position.
    """
    margin = 1e-9 * max(abs(gmin), abs(gmax), 1.0)
    for _ in range(8):
        k = rng.uniform(k_lo, k_hi)
        signs = (1.0, -1.0) if rng.random() < 0.5 else (-1.0, 1.0)
        for s in signs:
            cand = x + s * k * sd
            if gmin + margin < cand < gmax - margin and abs(cand - mu) >= k_lo * sd:
                return cand
    return None


def _inject_local(values, labels, taken, clean, gmin, gmax, count, plan, rng):
    k_lo, k_hi = plan.local_k
    placed = 0
    free = rng.permutation(np.flatnonzero(~taken))
    for i in free:
        if placed == count:
            break
        mu, sd = _neighborhood_stats(clean, i)
        if sd <= 0:
            continue
        cand = _local_value(clean[i], mu, sd, gmin, gmax, k_lo, k_hi, rng)
        if cand is None:
            continue
        values[i] = cand
        labels[i] = 1
        taken[i] = True
        placed += 1
    if placed < count:
        raise InjectionError(
            f"could only place {placed}/{count} local anomalies inside the global range"
        )


def _run_lengths(budget, cmin, cmax, rng):
    """Split a budget into run lengths drawn from [cmin, cmax], exactly."""

    def feasible(rem):
        if rem == 0:
            return True
        k_lo = -(-rem // cmax)  # ceil
        return rem >= cmin and k_lo <= rem // cmin

    if not feasible(budget):
        raise InjectionError(f"cluster budget {budget} not reachable with runs in [{cmin}, {cmax}]")
    lengths, rem = [], budget
    while rem > 0:
        options = [L for L in range(cmin, cmax + 1) if L <= rem and feasible(rem - L)]
        L = int(rng.choice(options))
        lengths.append(L)
        rem -= L
    return lengths


def _inject_clustered(values, labels, taken, clean, gmin, gmax, count, plan, rng):
    lengths = _run_lengths(count, plan.cluster_len[0], plan.cluster_len[1], rng)
    k_lo, k_hi = plan.local_k
    margin = 1e-9 * max(abs(gmin), abs(gmax), 1.0)
    for L in lengths:
        placed = False
        for _ in range(200):
            start = int(rng.integers(EDGE_MARGIN, len(values) - EDGE_MARGIN - L))
            # pad by one so adjacent runs never merge into a longer one
            if taken[start - 1 : start + L + 1].any():
                continue
            mu, sd = _neighborhood_stats(clean, start + L // 2)
            if sd <= 0:
                continue
            sign = 1.0 if rng.random() < 0.5 else -1.0
            if not gmin + margin < clean[start] + sign * k_lo * sd < gmax - margin:
                sign = -sign  # try the direction with headroom
            for j in range(start, start + L):
                k = rng.uniform(k_lo, k_hi)
                cand = clean[j] + sign * k * sd
                values[j] = float(np.clip(cand, gmin + margin, gmax - margin))
                labels[j] = 1
                taken[j] = True
            placed = True
            break
        if not placed:
            raise InjectionError("could not place a cluster run without overlap")
