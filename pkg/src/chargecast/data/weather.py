"""Weather forecast channel: CSV ingest and alignment to the load resolution."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import DataError

logger = logging.getLogger(__name__)

WEATHER_COLUMNS = ("timestamp", "temperature_c", "humidity_pct")
BASE_RESOLUTION_MIN = 15


def read_weather_csv(path: Path | str) -> pd.DataFrame:
    """Read `timestamp,temperature_c,humidity_pct` rows into a time-indexed frame."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"weather file not found: {path}")
    frame = pd.read_csv(path)
    missing = [c for c in WEATHER_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")
    frame["timestamp"] = pd.to_datetime(frame["timestamp"], errors="coerce")
    bad = frame["timestamp"].isna()
    if bad.any():
        rows = [int(i) + 2 for i in np.flatnonzero(bad.to_numpy())[:5]]
        raise DataError(f"{path}: unparseable timestamps at rows {rows}")
    frame = frame.set_index("timestamp").sort_index()
    if frame.index.has_duplicates:
        raise DataError(f"{path}: duplicate timestamps")
    logger.info(f"Read {len(frame)} weather rows from {path}")
    return frame[["temperature_c", "humidity_pct"]].astype(float)


def write_weather_csv(frame: pd.DataFrame, path: Path | str) -> None:
    out = frame[["temperature_c", "humidity_pct"]].copy()
    out.index = out.index.strftime("%Y-%m-%dT%H:%M:%S")
    out.index.name = "timestamp"
    out.to_csv(path, float_format="%.2f", lineterminator="\n")


def _offending_ranges(stamps: pd.DatetimeIndex, limit: int = 5) -> list[str]:
    ranges: list[str] = []
    start = prev = None
    for ts in stamps:
        if start is None:
            start = prev = ts
        elif ts - prev <= pd.Timedelta(minutes=BASE_RESOLUTION_MIN):
            prev = ts
        else:
            ranges.append(f"{start}..{prev}")
            start = prev = ts
    if start is not None:
        ranges.append(f"{start}..{prev}")
    return ranges[:limit]


def align_weather(frame: pd.DataFrame, resolution_min: int) -> pd.DataFrame:
    """Bring weather rows onto the load grid.

    Rows must sit on 15-minute boundaries. Coarser rows (e.g. hourly) are interpolated
    forward in time onto the 15-minute grid, only between two rows one spacing apart,
    so a missing row leaves both of its intervals missing. The 15-minute grid is then
    averaged to `resolution_min`; bins with any missing quarter-hour stay missing.
    """
    if frame.empty:
        raise DataError("weather series is empty")
    idx = pd.DatetimeIndex(frame.index)
    misaligned = idx[(idx.minute % BASE_RESOLUTION_MIN != 0) | (idx.second != 0)]
    if len(misaligned):
        raise DataError(
            "weather timestamps off the 15-minute grid: " + ", ".join(_offending_ranges(misaligned))
        )

    spacing = pd.Series(idx).diff().median()
    spacing_min = (
        BASE_RESOLUTION_MIN if pd.isna(spacing) else int(spacing.total_seconds() // 60)
    )
    grid = frame.resample(f"{BASE_RESOLUTION_MIN}min").asfreq()
    if spacing_min > BASE_RESOLUTION_MIN:
        fill = spacing_min // BASE_RESOLUTION_MIN - 1
        grid = grid.interpolate(method="time", limit=fill, limit_area="inside")
        # a quarter hour is kept only when both enclosing rows exist one spacing apart
        after = idx[idx.searchsorted(grid.index, side="left")]
        before = idx[idx.searchsorted(grid.index, side="right") - 1]
        span = after - before
        enclosed = (span == pd.Timedelta(0)) | (span == pd.Timedelta(minutes=spacing_min))
        grid.loc[~enclosed] = np.nan
        # the last original row has no right neighbour: hold it across its own interval
        held = grid.iloc[[-1] * fill]
        held.index = grid.index[-1] + pd.to_timedelta(
            np.arange(1, fill + 1) * BASE_RESOLUTION_MIN, unit="min"
        )
        grid = pd.concat([grid, held])
    if resolution_min == BASE_RESOLUTION_MIN:
        return grid

    factor = resolution_min // BASE_RESOLUTION_MIN
    if resolution_min % BASE_RESOLUTION_MIN != 0 or factor < 1:
        raise DataError(f"resolution {resolution_min} min is not a multiple of 15 minutes")
    resampler = grid.resample(f"{resolution_min}min")
    means = resampler.mean()
    counts = resampler.count()
    return means.where(counts >= factor)
