"""Session and weather ingest, load aggregation, forecast windows and synthetic corpora."""

from .sessions import (
    ChargingSession,
    aggregate_sessions,
    count_evs,
    read_sessions_csv,
    write_sessions_csv,
)
from .synthetic import SyntheticCorpus, generate_synthetic, ideal_ensemble
from .weather import align_weather, read_weather_csv, write_weather_csv
from .windows import (
    ForecastWindow,
    NormalizationStats,
    build_windows,
    denormalize,
    denormalize_load,
    fit_stats,
    normalize,
    normalize_load,
    split_windows,
)

__all__ = [
    "ChargingSession",
    "ForecastWindow",
    "NormalizationStats",
    "SyntheticCorpus",
    "aggregate_sessions",
    "align_weather",
    "build_windows",
    "count_evs",
    "denormalize",
    "denormalize_load",
    "fit_stats",
    "generate_synthetic",
    "ideal_ensemble",
    "normalize",
    "normalize_load",
    "read_sessions_csv",
    "read_weather_csv",
    "split_windows",
    "write_sessions_csv",
    "write_weather_csv",
]
