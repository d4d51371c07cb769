"""Synthetic charging corpus with a known generative process.

Each day draws its EV count from a Poisson law whose mean is `ev_count`, scaled by
`weekend_factor` on Saturdays and Sundays. Every session then draws:

* a start time from the day's template: on weekdays a morning bump N(8.5 h, 1 h) and an
  evening bump N(18 h, 1.5 h), on weekends one midday bump N(13 h, 2.5 h);
* an energy from Gamma(`energy_shape`, `mean_energy_kwh` / `energy_shape`);
* a duration of energy / `charger_kw`, at least five minutes.

The weekday evening share is `evening_share * (1 + temperature_sensitivity * (T - 15))`,
where T is the mean 16:00-20:00 temperature, clipped to [0.05, 0.95]. Temperature follows a
seasonal and diurnal cycle plus an AR(1) daily anomaly; humidity falls with temperature.

Given the day's EV count and weather, a day's load is a sum of i.i.d. session pulses, so the
process can be re-run to draw an oracle ensemble for any observed day.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np
import pandas as pd

from ..config import SyntheticConfig
from .sessions import ChargingSession, aggregate_sessions

logger = logging.getLogger(__name__)

MORNING = (8.5, 1.0)
EVENING = (18.0, 1.5)
WEEKEND = (13.0, 2.5)
MIN_DURATION_MIN = 5.0


@dataclass(frozen=True, eq=False)
class SyntheticCorpus:
    sessions: list[ChargingSession]
    weather: pd.DataFrame
    days: pd.DataFrame  # per day: ev_count, weekend, evening_temperature, evening_share
    config: SyntheticConfig


def _weather(cfg: SyntheticConfig, rng: np.random.Generator) -> pd.DataFrame:
    index = pd.date_range(pd.Timestamp(cfg.start), periods=cfg.days * 96, freq="15min")
    anomaly = np.zeros(cfg.days)
    for d in range(cfg.days):
        previous = anomaly[d - 1] if d else 0.0
        anomaly[d] = 0.7 * previous + rng.normal(0.0, 1.5)
    doy = index.dayofyear.to_numpy()
    hour = (index.hour + index.minute / 60.0).to_numpy()
    temperature = (
        15.0
        + 8.0 * np.sin(2 * np.pi * (doy - 110) / 365.25)
        + 5.0 * np.sin(2 * np.pi * (hour - 9.0) / 24.0)
        + np.repeat(anomaly, 96)
    )
    humidity = np.clip(65.0 - 1.8 * (temperature - 15.0) + rng.normal(0.0, 3.0, len(index)), 5, 100)
    return pd.DataFrame(
        {"temperature_c": np.round(temperature, 2), "humidity_pct": np.round(humidity, 2)},
        index=index,
    )


def evening_share(cfg: SyntheticConfig, evening_temperature: float) -> float:
    share = cfg.evening_share * (1.0 + cfg.temperature_sensitivity * (evening_temperature - 15.0))
    return float(np.clip(share, 0.05, 0.95))


def expected_daily_energy(cfg: SyntheticConfig, weekend: bool) -> float:
    """Closed-form mean energy (kWh) of the sessions starting on one day."""
    factor = cfg.weekend_factor if weekend else 1.0
    return cfg.ev_count * factor * cfg.mean_energy_kwh


def draw_day_sessions(
    cfg: SyntheticConfig,
    day: pd.Timestamp,
    count: int,
    share: float,
    rng: np.random.Generator,
) -> list[ChargingSession]:
    """Draw `count` sessions starting on `day` from the day's template."""
    if count == 0:
        return []
    if day.weekday() >= 5:
        hours = rng.normal(*WEEKEND, size=count)
    else:
        evening = rng.random(count) < share
        hours = np.where(
            evening, rng.normal(*EVENING, size=count), rng.normal(*MORNING, size=count)
        )
    hours = np.clip(hours, 0.0, 24.0 - 1.0 / 60.0)
    energy = np.round(rng.gamma(cfg.energy_shape, cfg.mean_energy_kwh / cfg.energy_shape, count), 4)
    duration = np.round(np.maximum(energy / cfg.charger_kw * 60.0, MIN_DURATION_MIN), 4)
    base = day.to_pydatetime()
    return [
        ChargingSession(
            start=base + timedelta(seconds=int(round(h * 3600.0))),
            duration_min=float(dur),
            energy_kwh=float(e),
        )
        for h, dur, e in zip(hours, duration, energy, strict=True)
    ]


def generate_synthetic(cfg: SyntheticConfig) -> SyntheticCorpus:
    """Deterministic for a fixed `cfg.seed`."""
    rng = np.random.default_rng(cfg.seed)
    weather = _weather(cfg, rng)
    evening_mask = (weather.index.hour >= 16) & (weather.index.hour < 20)
    evening_temperature = weather["temperature_c"][evening_mask].groupby(
        weather.index[evening_mask].normalize()
    ).mean()

    sessions: list[ChargingSession] = []
    rows = []
    for day in pd.date_range(pd.Timestamp(cfg.start), periods=cfg.days, freq="D"):
        weekend = day.weekday() >= 5
        rate = cfg.ev_count * (cfg.weekend_factor if weekend else 1.0)
        count = int(rng.poisson(rate))
        temperature = float(evening_temperature.loc[day])
        share = evening_share(cfg, temperature)
        sessions.extend(draw_day_sessions(cfg, day, count, share, rng))
        rows.append(
            {
                "day": day,
                "ev_count": count,
                "weekend": weekend,
                "evening_temperature": temperature,
                "evening_share": share,
            }
        )
    sessions.sort(key=lambda s: s.start)
    logger.info(f"Generated {len(sessions)} sessions over {cfg.days} days (seed {cfg.seed})")
    return SyntheticCorpus(sessions, weather, pd.DataFrame(rows).set_index("day"), cfg)


def ideal_ensemble(
    corpus: SyntheticCorpus,
    day: pd.Timestamp | datetime,
    members: int,
    resolution_min: int,
    seed: int = 0,
) -> np.ndarray:
    """Oracle forecast ensemble for `day`, shaped (members, steps_per_day), in kW.

    Each member redraws the day's sessions with the realized EV count and evening share;
    load carried in from sessions that started earlier is known and added unchanged.
    """
    day = pd.Timestamp(day).normalize()
    info = corpus.days.loc[day]
    start, end = day.to_pydatetime(), (day + pd.Timedelta(days=1)).to_pydatetime()
    earlier = [s for s in corpus.sessions if s.start < start and s.end > start]
    carry_in = aggregate_sessions(earlier, resolution_min, start, end).to_numpy()

    rng = np.random.default_rng([seed, day.toordinal()])
    out = np.empty((members, len(carry_in)))
    for n in range(members):
        drawn = draw_day_sessions(
            corpus.config, day, int(info["ev_count"]), float(info["evening_share"]), rng
        )
        out[n] = carry_in + aggregate_sessions(drawn, resolution_min, start, end).to_numpy()
    return out
