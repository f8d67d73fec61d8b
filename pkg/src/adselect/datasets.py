"""Synthetic hourly consumption generator for demos and acceptance runs.

Mimics residential load at the aggregate level: a seasonal winter/summer
swing, a two-peak daily cycle, weekend damping, a slowly wandering
weather component, and meter noise.  The weather term moves on a
multi-day timescale, so day-to-day level shifts are much larger than the
spread inside any single day; that headroom is what lets neighbourhood-
relative (local) anomalies fit strictly inside the series' own range.
"""

from __future__ import annotations

import numpy as np
from scipy.signal import lfilter

from .series import TimeSeries

__all__ = ["synthetic_consumption"]

# average daily shape: night trough, morning ramp, evening peak
_HOUR_SHAPE = np.array(
    [
        -1.00, -1.10, -1.15, -1.15, -1.05, -0.80,
        -0.30, 0.25, 0.45, 0.35, 0.25, 0.20,
        0.25, 0.20, 0.10, 0.15, 0.35, 0.75,
        1.10, 1.25, 1.10, 0.70, 0.10, -0.55,
    ]
)


def synthetic_consumption(
    n_hours: int,
    seed: int = 0,
    start: str = "2015-01-01T00:00",
    base: float = 640.0,
    annual_amp: float = 185.0,
    daily_amp: float = 52.0,
    weekend_drop: float = 55.0,
    weather_sd: float = 48.0,
    weather_hours: float = 72.0,
    noise_sd: float = 8.0,
) -> TimeSeries:
    """Generate an unlabelled hourly consumption series.

    Deterministic for a given ``(n_hours, seed)`` and parameter set.  Units
    are arbitrary kWh-like magnitudes, always positive with the defaults.
    ``weather_sd``/``weather_hours`` set the stationary spread and the
    correlation timescale of the wandering level component.
    """
    rng = np.random.default_rng(seed)
    t0 = np.datetime64(start, "s")
    timestamps = t0 + np.arange(n_hours) * np.timedelta64(3600, "s")

    hours = np.arange(n_hours)
    hour_of_day = hours % 24
    day = hours // 24
    day_of_week = day % 7
    day_of_year = day % 365

    annual = annual_amp * np.cos(2.0 * np.pi * (day_of_year - 15) / 365.0)
    # winters are also peakier day-to-day
    daily_scale = daily_amp * (1.0 + 0.15 * np.cos(2.0 * np.pi * (day_of_year - 15) / 365.0))
    daily = daily_scale * _HOUR_SHAPE[hour_of_day]
    weekend = np.where(day_of_week >= 5, -weekend_drop, 0.0)

    # AR(1) with stationary std weather_sd and e-folding time weather_hours
    rho = float(np.exp(-1.0 / weather_hours))
    shocks = rng.normal(0.0, 1.0, size=n_hours)
    w0 = rng.normal(0.0, 1.0)
    weather, _ = lfilter([np.sqrt(1.0 - rho * rho)], [1.0, -rho], shocks, zi=[rho * w0])
    weather = weather_sd * weather

    noise = rng.normal(0.0, noise_sd, size=n_hours)
    values = base + annual + daily + weekend + weather + noise
    return TimeSeries(values, timestamps)
