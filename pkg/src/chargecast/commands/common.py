"""Shared helpers for the subcommands: run directories, dataset loading, artifact checks."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any

import pandas as pd

from ..artifact import ArtifactManifest, load_artifact
from ..config import RunConfig
from ..data import (
    ChargingSession,
    ForecastWindow,
    aggregate_sessions,
    align_weather,
    build_windows,
    read_sessions_csv,
    read_weather_csv,
    split_windows,
)
from ..data.windows import default_test_start
from ..errors import ConfigurationError, DataError
from ..model import DenoiserParams

logger = logging.getLogger(__name__)

ARTIFACT_NAME = "model.zip"


def make_run_dir(cfg: RunConfig, command: str, run_dir: Path | None = None) -> Path:
    """Create `<run_root>/<timestamp>-seed<seed>-<command>` and store the effective config."""
    if run_dir is None:
        stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
        run_dir = cfg.run_root / f"{stamp}-seed{cfg.model.seed}-{command}"
    try:
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "effective_config.json").write_text(cfg.effective_json() + "\n")
    except OSError as exc:
        raise ConfigurationError(f"cannot write to run directory {run_dir}: {exc}") from exc
    logger.info(f"Run directory {run_dir}")
    return run_dir


def write_json(path: Path, payload: dict[str, Any]) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


@dataclass(frozen=True)
class Dataset:
    sessions: list[ChargingSession]
    weather: pd.DataFrame
    load: pd.Series
    windows: list[ForecastWindow]


def load_dataset(cfg: RunConfig) -> Dataset:
    """Read the configured CSVs and cut them into forecast windows."""
    if cfg.data.sessions_csv is None or cfg.data.weather_csv is None:
        raise ConfigurationError(
            "data.sessions_csv and data.weather_csv must be set (config file, "
            "CHARGECAST_DATA__SESSIONS_CSV or --set data.sessions_csv=...)"
        )
    sessions = read_sessions_csv(cfg.data.sessions_csv)
    weather = align_weather(read_weather_csv(cfg.data.weather_csv), cfg.window.resolution_min)
    start = weather.index[0].floor("D")
    end = (weather.index[-1] + pd.Timedelta(minutes=cfg.window.resolution_min)).ceil("D")
    load = aggregate_sessions(sessions, cfg.window.resolution_min, start, end)
    windows = build_windows(load, weather, sessions, cfg.window)
    if not windows:
        raise DataError("the dataset yields no complete forecast windows")
    return Dataset(sessions, weather, load, windows)


def split(
    cfg: RunConfig, windows: list[ForecastWindow]
) -> tuple[list[ForecastWindow], list[ForecastWindow]]:
    boundary = (
        pd.Timestamp(cfg.data.test_start)
        if cfg.data.test_start is not None
        else default_test_start(windows, cfg.data.test_fraction)
    )
    train, test = split_windows(windows, boundary, cfg.window)
    logger.info(f"Split at {boundary.date()}: {len(train)} train, {len(test)} test windows")
    if not train:
        raise DataError(f"no training windows end before {boundary.date()}")
    return train, test


def open_artifact(path: Path, cfg: RunConfig) -> tuple[DenoiserParams, ArtifactManifest]:
    """Load an artifact and check that the run's window settings match the trained ones."""
    params, manifest = load_artifact(path)
    if manifest.window != cfg.window:
        raise ConfigurationError(
            f"{path} was trained with window {manifest.window.model_dump()}, "
            f"but this run uses {cfg.window.model_dump()}; align the [window] section"
        )
    return params, manifest
