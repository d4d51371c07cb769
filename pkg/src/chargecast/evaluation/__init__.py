"""Forecast scoring, reference baselines and report output."""

from .baseline import QuantileBaseline, climatology_forecast, train_quantile_baseline
from .metrics import (
    LEVELS,
    EvalReport,
    ForecastEnsemble,
    SampleScore,
    coverage_and_width,
    crps,
    crps_profile,
    cumulative_energy,
    evaluate_ensembles,
    evaluate_quantile_tracks,
    mae,
    pinball_loss,
    quantile,
    quantile_crps,
)
from .report import plot_bands, write_ensemble_csv, write_report

__all__ = [
    "LEVELS",
    "EvalReport",
    "ForecastEnsemble",
    "QuantileBaseline",
    "SampleScore",
    "climatology_forecast",
    "coverage_and_width",
    "crps",
    "crps_profile",
    "cumulative_energy",
    "evaluate_ensembles",
    "evaluate_quantile_tracks",
    "mae",
    "pinball_loss",
    "plot_bands",
    "quantile",
    "quantile_crps",
    "train_quantile_baseline",
    "write_ensemble_csv",
    "write_report",
]
