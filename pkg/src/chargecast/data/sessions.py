"""Charging sessions: CSV ingest and aggregation into a load series."""

from __future__ import annotations

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from pathlib import Path

import numpy as np
import pandas as pd

from ..errors import ConfigurationError, DataError

logger = logging.getLogger(__name__)

SESSION_COLUMNS = ("start_time", "duration_min", "energy_kwh")


@dataclass(frozen=True)
class ChargingSession:
    start: datetime
    duration_min: float
    energy_kwh: float

    def __post_init__(self) -> None:
        if not np.isfinite(self.duration_min) or self.duration_min <= 0:
            raise DataError(
                f"session at {self.start}: duration must be > 0, got {self.duration_min}"
            )
        if not np.isfinite(self.energy_kwh) or self.energy_kwh < 0:
            raise DataError(f"session at {self.start}: energy must be finite and >= 0")

    @property
    def end(self) -> datetime:
        return self.start + timedelta(minutes=self.duration_min)

    @property
    def power_kw(self) -> float:
        """Constant charging power over the session."""
        return self.energy_kwh / (self.duration_min / 60.0)


def read_sessions_csv(path: Path | str) -> list[ChargingSession]:
    """Read `start_time,duration_min,energy_kwh` rows; invalid rows are logged and skipped."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"sessions file not found: {path}")
    frame = pd.read_csv(path)
    missing = [c for c in SESSION_COLUMNS if c not in frame.columns]
    if missing:
        raise DataError(f"{path}: missing columns {missing}")

    starts = pd.to_datetime(frame["start_time"], errors="coerce")
    sessions: list[ChargingSession] = []
    for row, (start, duration, energy) in enumerate(
        zip(starts, frame["duration_min"], frame["energy_kwh"], strict=True), start=2
    ):
        if pd.isna(start):
            logger.warning(f"{path}:{row}: unparseable start_time, record rejected")
            continue
        try:
            sessions.append(
                ChargingSession(start.to_pydatetime(), float(duration), float(energy))
            )
        except (DataError, ValueError) as e:
            logger.warning(f"{path}:{row}: record rejected: {e}")
    logger.info(f"Read {len(sessions)} sessions from {path}")
    return sessions


def write_sessions_csv(sessions: Sequence[ChargingSession], path: Path | str) -> None:
    frame = pd.DataFrame(
        {
            "start_time": [s.start.strftime("%Y-%m-%dT%H:%M:%S") for s in sessions],
            "duration_min": [s.duration_min for s in sessions],
            "energy_kwh": [s.energy_kwh for s in sessions],
        }
    )
    frame.to_csv(path, index=False, float_format="%.4f", lineterminator="\n")


def _minutes_since(origin: pd.Timestamp, moments: Iterable[datetime]) -> np.ndarray:
    return np.array([(pd.Timestamp(m) - origin).total_seconds() / 60.0 for m in moments])


def aggregate_sessions(
    sessions: Sequence[ChargingSession],
    resolution_min: int,
    start: datetime | None = None,
    end: datetime | None = None,
) -> pd.Series:
    """Aggregate sessions into a load series in kW.

    Every session draws constant power `energy / duration` over [start, start + duration).
    The load of a bin is the time-weighted mean power inside it, so bin load times bin
    hours sums to the total session energy. Without explicit bounds the index spans whole
    days from the first start to the last end.
    """
    if resolution_min < 1 or 60 % resolution_min != 0:
        raise ConfigurationError(f"resolution must divide 60 minutes, got {resolution_min}")
    if start is None:
        if not sessions:
            raise DataError("cannot infer a time range from zero sessions")
        start = pd.Timestamp(min(s.start for s in sessions)).floor("D")
    if end is None:
        if not sessions:
            raise DataError("cannot infer a time range from zero sessions")
        end = pd.Timestamp(max(s.end for s in sessions)).ceil("D")
    origin = pd.Timestamp(start)
    index = pd.date_range(origin, pd.Timestamp(end), freq=f"{resolution_min}min", inclusive="left")
    load = np.zeros(len(index))
    if not sessions or len(index) == 0:
        return pd.Series(load, index=index, name="load_kw")

    begin = _minutes_since(origin, (s.start for s in sessions))
    finish = begin + np.array([s.duration_min for s in sessions])
    power = np.array([s.power_kw for s in sessions])
    width = float(resolution_min)
    span = len(index) * width

    for a, b, p in zip(begin, finish, power, strict=True):
        a_clip, b_clip = max(a, 0.0), min(b, span)
        if b_clip <= a_clip:
            continue
        first = int(np.floor(a_clip / width))
        last = int(np.ceil(b_clip / width))
        lo = np.arange(first, last) * width
        overlap = np.minimum(b_clip, lo + width) - np.maximum(a_clip, lo)
        load[first:last] += p * np.clip(overlap, 0.0, None) / width
    return pd.Series(load, index=index, name="load_kw")


def count_evs(sessions: Sequence[ChargingSession], day: date) -> int:
    """Number of sessions whose start falls on `day`."""
    return sum(1 for s in sessions if s.start.date() == day)


def session_starts(sessions: Sequence[ChargingSession]) -> np.ndarray:
    """Sorted start times as datetime64 for vectorized range counts."""
    starts = [np.datetime64(s.start, "ns") for s in sessions]
    return np.sort(np.array(starts, dtype="datetime64[ns]"))


def count_in_range(starts: np.ndarray, begin: pd.Timestamp, end: pd.Timestamp) -> int:
    """Number of sorted `starts` in [begin, end)."""
    lo = np.searchsorted(starts, np.datetime64(begin, "ns"), side="left")
    hi = np.searchsorted(starts, np.datetime64(end, "ns"), side="left")
    return int(hi - lo)
