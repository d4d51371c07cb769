"""Forecast windows, the temporal train/test split and z-score normalization."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from datetime import date

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict

from ..config import WindowConfig
from ..errors import ConfigurationError, DataError
from .sessions import ChargingSession, count_in_range, session_starts

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]
WEEKDAYS = 7


def weekday_onehot(day: pd.Timestamp | date) -> Array:
    """One-hot day of week, Monday = index 0."""
    onehot = np.zeros(WEEKDAYS)
    onehot[pd.Timestamp(day).weekday()] = 1.0
    return onehot


@dataclass(frozen=True, eq=False)
class ForecastWindow:
    """History, covariates and target anchored at `anchor` (the first forecast bin)."""

    anchor: pd.Timestamp
    history: Array
    target: Array
    temperature: Array
    humidity: Array
    weekday: Array
    ev_count: float
    normalized: bool = False

    def __post_init__(self) -> None:
        tau = self.target.shape
        if self.history.ndim != 1 or self.target.ndim != 1:
            raise DataError(f"window {self.anchor}: history and target must be 1-D")
        if self.temperature.shape != tau or self.humidity.shape != tau:
            raise DataError(
                f"window {self.anchor}: weather length {self.temperature.shape} "
                f"does not match horizon {tau}"
            )
        if self.weekday.shape != (WEEKDAYS,) or not (
            np.count_nonzero(self.weekday == 1.0) == 1 and np.count_nonzero(self.weekday) == 1
        ):
            raise DataError(f"window {self.anchor}: weekday must be one-hot over 7 days")

    @property
    def horizon(self) -> int:
        return int(self.target.shape[0])


def build_windows(
    load: pd.Series,
    weather: pd.DataFrame,
    sessions: Sequence[ChargingSession],
    cfg: WindowConfig,
) -> list[ForecastWindow]:
    """One window per day boundary with a complete history, target and weather.

    Windows touching a missing bin are dropped and logged.
    """
    freq = pd.Timedelta(minutes=cfg.resolution_min)
    load_index = pd.DatetimeIndex(load.index)
    if len(load_index) > 1 and (pd.Series(load_index).diff().dropna() != freq).any():
        raise DataError(f"load series is not on a regular {cfg.resolution_min}-minute grid")
    off_grid = load_index[(load_index - load_index.normalize()) % freq != pd.Timedelta(0)]
    if len(off_grid):
        raise DataError(
            f"load bins off the {cfg.resolution_min}-minute grid starting {off_grid[0]}"
        )
    weather_index = pd.DatetimeIndex(weather.index)
    off_grid = weather_index[(weather_index - weather_index.normalize()) % freq != pd.Timedelta(0)]
    if len(off_grid):
        raise DataError(
            f"weather rows misaligned with the {cfg.resolution_min}-minute load grid: "
            f"{off_grid[0]}..{off_grid[-1]}"
        )

    tau, omega = cfg.horizon, cfg.history
    grid = pd.DataFrame({"load": load}).join(weather[["temperature_c", "humidity_pct"]], how="left")
    starts = session_starts(sessions)
    values = grid.to_numpy()
    position = {ts: i for i, ts in enumerate(grid.index)}

    windows: list[ForecastWindow] = []
    for day in pd.DatetimeIndex(grid.index.normalize().unique()):
        i = position.get(day)
        if i is None or i - omega < 0 or i + tau > len(grid):
            continue
        history = values[i - omega : i, 0]
        target = values[i : i + tau, 0]
        weather_block = values[i : i + tau, 1:]
        if np.isnan(history).any() or np.isnan(target).any() or np.isnan(weather_block).any():
            logger.info(f"Dropping window at {day.date()}: missing data in history/target/weather")
            continue
        ev_count = count_in_range(starts, day, day + tau * freq)
        windows.append(
            ForecastWindow(
                anchor=day,
                history=history.astype(float),
                target=target.astype(float),
                temperature=weather_block[:, 0].astype(float),
                humidity=weather_block[:, 1].astype(float),
                weekday=weekday_onehot(day),
                ev_count=float(ev_count),
            )
        )
    logger.info(f"Built {len(windows)} windows (omega={omega}, tau={tau})")
    return windows


def split_windows(
    windows: Sequence[ForecastWindow],
    test_start: date | pd.Timestamp,
    cfg: WindowConfig,
) -> tuple[list[ForecastWindow], list[ForecastWindow]]:
    """Strictly temporal split.

    Training windows end before `test_start`; test windows start their history at or after
    it, so no test history overlaps a training target.
    """
    boundary = pd.Timestamp(test_start)
    step = pd.Timedelta(minutes=cfg.resolution_min)
    train = [w for w in windows if w.anchor + cfg.horizon * step <= boundary]
    test = [w for w in windows if w.anchor - cfg.history * step >= boundary]
    return train, test


def default_test_start(windows: Sequence[ForecastWindow], fraction: float) -> pd.Timestamp:
    """Boundary leaving roughly the last `fraction` of the covered days for testing."""
    if not windows:
        raise DataError("no complete windows to split")
    first = min(w.anchor for w in windows).normalize()
    last = max(w.anchor for w in windows).normalize()
    span = (last - first).days
    return first + pd.Timedelta(days=int(round(span * (1.0 - fraction))))


class NormalizationStats(BaseModel):
    """Per-channel z-score statistics fitted on the training split."""

    model_config = ConfigDict(frozen=True)

    load_mean: float
    load_std: float
    temperature_mean: float
    temperature_std: float
    humidity_mean: float
    humidity_std: float
    ev_count_mean: float
    ev_count_std: float

    def check(self) -> NormalizationStats:
        for channel in ("load", "temperature", "humidity", "ev_count"):
            std = getattr(self, f"{channel}_std")
            if not np.isfinite(std) or std <= 0:
                raise ConfigurationError(f"{channel} channel has zero spread (std={std})")
        return self


def fit_stats(windows: Sequence[ForecastWindow]) -> NormalizationStats:
    if not windows:
        raise DataError("cannot fit normalization statistics on zero windows")
    if any(w.normalized for w in windows):
        raise ConfigurationError("fit_stats expects windows in physical units")
    load = np.concatenate([np.concatenate([w.history, w.target]) for w in windows])
    temperature = np.concatenate([w.temperature for w in windows])
    humidity = np.concatenate([w.humidity for w in windows])
    ev = np.array([w.ev_count for w in windows])
    return NormalizationStats(
        load_mean=float(load.mean()),
        load_std=float(load.std()),
        temperature_mean=float(temperature.mean()),
        temperature_std=float(temperature.std()),
        humidity_mean=float(humidity.mean()),
        humidity_std=float(humidity.std()),
        ev_count_mean=float(ev.mean()),
        ev_count_std=float(ev.std()),
    ).check()


def normalize_load(values: ArrayLike, stats: NormalizationStats) -> Array:
    stats.check()
    return (np.asarray(values, dtype=float) - stats.load_mean) / stats.load_std


def denormalize_load(values: ArrayLike, stats: NormalizationStats) -> Array:
    stats.check()
    return np.asarray(values, dtype=float) * stats.load_std + stats.load_mean


def normalize(window: ForecastWindow, stats: NormalizationStats) -> ForecastWindow:
    if window.normalized:
        return window
    stats.check()
    return replace(
        window,
        history=normalize_load(window.history, stats),
        target=normalize_load(window.target, stats),
        temperature=(window.temperature - stats.temperature_mean) / stats.temperature_std,
        humidity=(window.humidity - stats.humidity_mean) / stats.humidity_std,
        ev_count=(window.ev_count - stats.ev_count_mean) / stats.ev_count_std,
        normalized=True,
    )


def denormalize(window: ForecastWindow, stats: NormalizationStats) -> ForecastWindow:
    if not window.normalized:
        return window
    stats.check()
    return replace(
        window,
        history=denormalize_load(window.history, stats),
        target=denormalize_load(window.target, stats),
        temperature=window.temperature * stats.temperature_std + stats.temperature_mean,
        humidity=window.humidity * stats.humidity_std + stats.humidity_mean,
        ev_count=window.ev_count * stats.ev_count_std + stats.ev_count_mean,
        normalized=False,
    )


def scale_ev_count(window: ForecastWindow, factor: float) -> ForecastWindow:
    """Same window with the EV count covariate multiplied by `factor` (physical units)."""
    if window.normalized:
        raise ConfigurationError("scale the EV count before normalizing")
    return replace(window, ev_count=window.ev_count * factor)
