"""Shared fixtures: tiny denoisers, schedules and synthetic windows."""

import numpy as np
import pandas as pd
import pytest

from chargecast.data.windows import ForecastWindow
from chargecast.model import ConditionSet, DenoiserConfig, DenoiserParams
from chargecast.schedule import NoiseSchedule, build_quadratic_schedule

from .helpers import make_window


@pytest.fixture
def tiny_config() -> DenoiserConfig:
    return DenoiserConfig(horizon=8, history=16, steps=10, hidden_dim=8, head_count=2)


@pytest.fixture
def tiny_params(tiny_config: DenoiserConfig) -> DenoiserParams:
    return DenoiserParams(tiny_config, seed=3)


@pytest.fixture
def tiny_schedule() -> NoiseSchedule:
    return build_quadratic_schedule(10, 1e-4, 0.5)


@pytest.fixture
def default_schedule() -> NoiseSchedule:
    return build_quadratic_schedule(200, 1e-4, 0.5)


@pytest.fixture
def tiny_windows(tiny_config: DenoiserConfig) -> list[ForecastWindow]:
    rng = np.random.default_rng(11)
    days = pd.date_range("2024-03-04", periods=6, freq="D")
    return [
        make_window(rng, tiny_config.horizon, tiny_config.history, day=str(d.date()))
        for d in days
    ]


@pytest.fixture
def tiny_condition(tiny_windows: list[ForecastWindow]) -> ConditionSet:
    return ConditionSet.from_window(tiny_windows[0])
