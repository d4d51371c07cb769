"""Tests for the quantile-regression and climatology baselines."""

import numpy as np
import pandas as pd
import pytest

from chargecast.config import load_config
from chargecast.data import (
    aggregate_sessions,
    align_weather,
    build_windows,
    fit_stats,
    generate_synthetic,
    normalize,
    split_windows,
)
from chargecast.data.windows import ForecastWindow, NormalizationStats, denormalize
from chargecast.errors import ConfigurationError, DomainError
from chargecast.evaluation.baseline import (
    QuantileBaseline,
    climatology_forecast,
    pinball_objective,
    train_quantile_baseline,
)
from chargecast.evaluation.metrics import LEVELS, mae, pinball_loss
from chargecast.model import ConditionSet, DenoiserConfig, collate
from chargecast.nn import ParamTensor

from .helpers import central_difference, grad_close

STATS = NormalizationStats(
    load_mean=3.0,
    load_std=2.0,
    temperature_mean=10.0,
    temperature_std=5.0,
    humidity_mean=60.0,
    humidity_std=10.0,
    ev_count_mean=20.0,
    ev_count_std=4.0,
)


def test_output_layout(tiny_config: DenoiserConfig, tiny_windows: list[ForecastWindow]) -> None:
    """Test one track per level for single and batched conditions."""
    model = QuantileBaseline(tiny_config, seed=1)
    assert model(ConditionSet.from_window(tiny_windows[0])).shape == (5, 8)
    _, cond = collate(tiny_windows)
    assert model(cond).shape == (6, 5, 8)
    assert all(name.startswith("baseline.") for name in model.parameters())


def test_pinball_objective_value_and_gradient() -> None:
    """Test the summed pinball objective against the scalar loss and central differences."""
    rng = np.random.default_rng(0)
    pred = ParamTensor(rng.normal(size=(3, 5, 4)), name="pred")
    target = rng.normal(size=(3, 4))
    loss = pinball_objective(pred, target, LEVELS)
    expected = sum(
        np.mean(pinball_loss(pred.data[:, i, :], target, q)) for i, q in enumerate(LEVELS)
    )
    assert loss.item() == pytest.approx(expected, rel=1e-12)

    loss.backward()
    for index in [(0, 0, 0), (1, 2, 3), (2, 4, 1)]:
        numeric = central_difference(
            lambda: pinball_objective(pred, target, LEVELS).item(), pred, index
        )
        assert grad_close(pred.grad[index], numeric)


def test_training_reduces_the_objective(
    tiny_config: DenoiserConfig, tiny_windows: list[ForecastWindow]
) -> None:
    """Test that a few epochs lower the pinball loss and predictions come back in kW."""
    model, curve = train_quantile_baseline(
        tiny_windows, tiny_config, epochs=40, learning_rate=0.01, batch_size=6, seed=0
    )
    assert len(curve) == 40
    assert curve[-1] < curve[0]

    physical = [denormalize(w, STATS) for w in tiny_windows[:2]]
    tracks = model.predict(physical, STATS)
    assert len(tracks) == 2
    assert tracks[0].shape == (5, 8)
    _, cond = collate(tiny_windows[:2])
    expected = model(cond).data[1] * 2.0 + 3.0
    np.testing.assert_allclose(tracks[1], expected, rtol=1e-10, atol=1e-10)
    assert model.predict([], STATS) == []


def test_training_input_checks(
    tiny_config: DenoiserConfig, tiny_windows: list[ForecastWindow]
) -> None:
    """Test that training needs normalized, non-empty data."""
    with pytest.raises(DomainError):
        train_quantile_baseline([], tiny_config, epochs=1)
    physical = [denormalize(w, STATS) for w in tiny_windows]
    with pytest.raises(ConfigurationError):
        train_quantile_baseline(physical, tiny_config, epochs=1)


def test_climatology(tiny_windows: list[ForecastWindow]) -> None:
    """Test the per-step mean of training targets."""
    expected = np.mean([w.target for w in tiny_windows], axis=0)
    np.testing.assert_allclose(climatology_forecast(tiny_windows), expected)
    with pytest.raises(DomainError):
        climatology_forecast([])


@pytest.mark.slow
def test_median_track_beats_climatology_on_synthetic_days() -> None:
    """Test that the conditioned median track has a lower MAE than the climatology mean."""
    cfg = load_config(
        None,
        {
            "window.resolution_min": 60,
            "window.history_days": 1,
            "model.hidden_dim": 16,
            "model.head_count": 4,
            "synthetic.days": 200,
        },
    )
    corpus = generate_synthetic(cfg.synthetic)
    start = pd.Timestamp(cfg.synthetic.start)
    end = start + pd.Timedelta(days=cfg.synthetic.days)
    load = aggregate_sessions(corpus.sessions, 60, start, end)
    windows = build_windows(load, align_weather(corpus.weather, 60), corpus.sessions, cfg.window)
    train, test = split_windows(windows, start + pd.Timedelta(days=170), cfg.window)
    stats = fit_stats(train)

    model, _ = train_quantile_baseline(
        [normalize(w, stats) for w in train],
        DenoiserConfig.from_run_config(cfg),
        epochs=100,
        learning_rate=0.005,
        batch_size=16,
        seed=0,
    )
    median = LEVELS.index(0.5)
    tracks = model.predict(test, stats)
    model_mae = np.mean([mae(q[median], w.target) for q, w in zip(tracks, test, strict=True)])
    clim = climatology_forecast(train)
    clim_mae = np.mean([mae(clim, w.target) for w in test])
    assert model_mae < clim_mae
