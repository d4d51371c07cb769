"""Tests for the synthetic charging corpus."""

import numpy as np
import pandas as pd
import pytest

from chargecast.config import SyntheticConfig
from chargecast.data.sessions import aggregate_sessions, count_evs
from chargecast.data.synthetic import (
    draw_day_sessions,
    evening_share,
    expected_daily_energy,
    generate_synthetic,
    ideal_ensemble,
)


@pytest.fixture(scope="module")
def corpus_config() -> SyntheticConfig:
    return SyntheticConfig(days=28, seed=3)


def test_generation_is_deterministic(corpus_config: SyntheticConfig) -> None:
    """Test that one seed always gives the same corpus and another seed does not."""
    first = generate_synthetic(corpus_config)
    again = generate_synthetic(corpus_config)
    other = generate_synthetic(corpus_config.model_copy(update={"seed": 4}))
    assert first.sessions == again.sessions
    pd.testing.assert_frame_equal(first.weather, again.weather)
    assert first.sessions != other.sessions


def test_day_table_matches_sessions(corpus_config: SyntheticConfig) -> None:
    """Test that the recorded EV count per day equals the sessions drawn for it."""
    corpus = generate_synthetic(corpus_config)
    assert len(corpus.days) == 28
    for day, row in corpus.days.iterrows():
        assert count_evs(corpus.sessions, day.date()) == row["ev_count"]
        assert row["weekend"] == (day.weekday() >= 5)
        assert 0.05 <= row["evening_share"] <= 0.95
    assert len(corpus.weather) == 28 * 96
    assert corpus.weather["humidity_pct"].between(5, 100).all()


def test_daily_energy_matches_closed_form() -> None:
    """Test the mean energy per weekday against its closed form."""
    cfg = SyntheticConfig(days=140, seed=11)
    corpus = generate_synthetic(cfg)
    energy = pd.Series(
        [s.energy_kwh for s in corpus.sessions],
        index=pd.DatetimeIndex([s.start for s in corpus.sessions]).normalize(),
    )
    daily = energy.groupby(level=0).sum().reindex(corpus.days.index, fill_value=0.0)
    weekdays = daily[~corpus.days["weekend"].to_numpy()]
    weekends = daily[corpus.days["weekend"].to_numpy()]
    assert weekdays.mean() == pytest.approx(expected_daily_energy(cfg, False), rel=0.1)
    assert weekends.mean() == pytest.approx(expected_daily_energy(cfg, True), rel=0.15)


def test_evening_share_is_clipped() -> None:
    """Test the temperature response of the evening share and its bounds."""
    cfg = SyntheticConfig(evening_share=0.5, temperature_sensitivity=0.1)
    assert evening_share(cfg, 15.0) == pytest.approx(0.5)
    assert evening_share(cfg, 17.0) == pytest.approx(0.6)
    assert evening_share(cfg, 40.0) == 0.95
    assert evening_share(cfg, -20.0) == 0.05


def test_ideal_ensemble(corpus_config: SyntheticConfig) -> None:
    """Test the oracle ensemble's shape, sign and reproducibility."""
    corpus = generate_synthetic(corpus_config)
    day = corpus.days.index[10]
    ensemble = ideal_ensemble(corpus, day, members=20, resolution_min=30, seed=1)
    assert ensemble.shape == (20, 48)
    assert np.all(ensemble >= 0.0)
    np.testing.assert_array_equal(
        ensemble, ideal_ensemble(corpus, day, members=20, resolution_min=30, seed=1)
    )
    assert not np.allclose(ensemble[0], ensemble[1])


def _day_profile(day: str, rng: np.random.Generator) -> np.ndarray:
    start = pd.Timestamp(day)
    sessions = draw_day_sessions(SyntheticConfig(), start, 2000, 0.45, rng)
    load = aggregate_sessions(sessions, 60, start, start + pd.Timedelta(days=1))
    return load.to_numpy() / load.sum()


def test_weekend_template_moves_the_peak_to_midday() -> None:
    """Test that a Saturday draws a midday profile where a Monday has morning and evening peaks."""
    monday = _day_profile("2024-03-04", np.random.default_rng(5))
    saturday = _day_profile("2024-03-09", np.random.default_rng(5))
    assert 12 <= int(np.argmax(saturday)) <= 14
    assert not 11 <= int(np.argmax(monday)) <= 15
    assert saturday[11:15].sum() > 0.4
    assert monday[11:15].sum() < 0.1
    assert monday[17:21].sum() > 2 * saturday[17:21].sum()


def test_doubling_the_ev_count_doubles_daily_energy() -> None:
    """Test the closed form exactly and the generated corpus approximately."""
    base = SyntheticConfig(days=140, seed=2)
    doubled = base.model_copy(update={"ev_count": 2 * base.ev_count})
    for weekend in (False, True):
        assert expected_daily_energy(doubled, weekend) == pytest.approx(
            2 * expected_daily_energy(base, weekend)
        )
    totals = [
        sum(s.energy_kwh for s in generate_synthetic(cfg).sessions) for cfg in (base, doubled)
    ]
    assert totals[1] / totals[0] == pytest.approx(2.0, rel=0.1)
