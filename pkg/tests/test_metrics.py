"""Tests for the forecast scores."""

import numpy as np
import pytest

from chargecast.errors import DataError, DomainError
from chargecast.evaluation.metrics import (
    LEVELS,
    EvalReport,
    ForecastEnsemble,
    coverage_and_width,
    crossing_rate,
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


def _crps_pairwise(members: np.ndarray, y: float) -> float:
    n = members.size
    pairs = np.abs(members[:, None] - members[None, :]).sum()
    return float(np.mean(np.abs(members - y)) - pairs / (2 * n * n))


@pytest.mark.parametrize(
    ("q", "expected"), [(0.0, 1.0), (0.25, 1.75), (0.5, 2.5), (1.0, 4.0)]
)
def test_quantile_interpolates_between_ranks(q: float, expected: float) -> None:
    """Test the linear order-statistic quantile."""
    assert quantile([4.0, 1.0, 3.0, 2.0], q) == pytest.approx(expected)


def test_quantile_domain() -> None:
    """Test empty samples and levels outside [0, 1]."""
    with pytest.raises(DomainError):
        quantile([], 0.5)
    with pytest.raises(DomainError):
        quantile([1.0], 1.5)


def test_crps_matches_pairwise_definition() -> None:
    """Test the sorted evaluation against the O(N^2) definition."""
    rng = np.random.default_rng(0)
    for n in (1, 2, 7, 50):
        members = rng.gamma(2.0, 3.0, n)
        y = float(rng.normal(5.0, 2.0))
        assert crps(members, y) == pytest.approx(_crps_pairwise(members, y), rel=1e-12, abs=1e-12)


def test_crps_examples() -> None:
    """Test hand-computed CRPS values."""
    assert crps([0.0, 1.0], 0.5) == pytest.approx(0.25)
    assert crps([2.0], 5.0) == pytest.approx(3.0)
    assert crps([3.0, 3.0, 3.0], 3.0) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(DomainError):
        crps([], 0.0)


def test_crps_profile_averages_steps() -> None:
    """Test that the profile score is the mean of per-step scores."""
    rng = np.random.default_rng(1)
    trajectories = rng.normal(size=(30, 6))
    truth = rng.normal(size=6)
    expected = np.mean([crps(trajectories[:, k], truth[k]) for k in range(6)])
    assert crps_profile(trajectories, truth) == pytest.approx(expected, rel=1e-12)
    with pytest.raises(DataError):
        crps_profile(trajectories, truth[:5])


def test_mae() -> None:
    """Test the point error and its length check."""
    assert mae([1.0, 2.0, 3.0], [2.0, 2.0, 1.0]) == pytest.approx(1.0)
    with pytest.raises(DataError):
        mae([1.0, 2.0], [1.0])


def test_ensemble_tracks() -> None:
    """Test quantile tracks and central intervals of an ensemble."""
    members = np.tile(np.arange(101.0)[:, None], (1, 3))
    ensemble = ForecastEnsemble.from_trajectories(members)
    assert ensemble.size == 101
    assert ensemble.horizon == 3
    np.testing.assert_allclose(ensemble.median, 50.0)
    low, high = ensemble.interval(0.9)
    np.testing.assert_allclose(low, 5.0)
    np.testing.assert_allclose(high, 95.0)
    np.testing.assert_allclose(ensemble.track(0.25), 25.0)
    with pytest.raises(DomainError):
        ensemble.interval(0.8)
    with pytest.raises(DomainError):
        ForecastEnsemble.from_trajectories(np.zeros((0, 3)))
    with pytest.raises(DomainError):
        ForecastEnsemble.from_trajectories(members, levels=(0.1, 0.9))


def test_coverage_and_width() -> None:
    """Test interval coverage of a known ensemble."""
    ensemble = ForecastEnsemble.from_trajectories(np.tile(np.arange(101.0)[:, None], (1, 4)))
    coverage, width = coverage_and_width(ensemble, [50.0, 4.0, 95.0, 99.0], 0.9)
    assert coverage == 0.5
    assert width == pytest.approx(90.0)
    coverage, width = coverage_and_width(ensemble, [50.0, 4.0, 95.0, 99.0], 0.5)
    assert coverage == 0.25
    assert width == pytest.approx(50.0)


def test_pinball_loss() -> None:
    """Test the asymmetric quantile loss."""
    assert pinball_loss(1.0, 3.0, 0.9) == pytest.approx(1.8)
    assert pinball_loss(1.0, -1.0, 0.9) == pytest.approx(0.2)
    np.testing.assert_allclose(pinball_loss([0.0, 0.0], [1.0, -1.0], 0.5), [0.5, 0.5])
    with pytest.raises(DomainError):
        pinball_loss(0.0, 1.0, 1.0)


def test_quantile_crps() -> None:
    """Test the quantile-track score on exact and shifted tracks."""
    truth = np.array([1.0, 2.0, 3.0])
    exact = np.tile(truth, (5, 1))
    assert quantile_crps(exact, truth) == 0.0
    shifted = exact + 1.0
    expected = 2.0 * np.mean([(1.0 - q) * 1.0 for q in LEVELS])
    assert quantile_crps(shifted, truth) == pytest.approx(expected)
    with pytest.raises(DataError):
        quantile_crps(exact[:4], truth)


def test_crossing_rate() -> None:
    """Test counting inverted adjacent quantile tracks."""
    tracks = np.array([[0.0, 2.0], [1.0, 1.0], [2.0, 0.0]])
    assert crossing_rate(tracks) == 0.5
    assert crossing_rate(np.sort(np.random.default_rng(0).normal(size=(5, 4)), axis=0)) == 0.0


def test_cumulative_energy() -> None:
    """Test integrating a kW profile to running kWh."""
    np.testing.assert_allclose(cumulative_energy([4.0, 4.0, 4.0, 4.0], 15), [1, 2, 3, 4])
    np.testing.assert_allclose(cumulative_energy([[2.0, 2.0]], 60), [[2.0, 4.0]])


def test_evaluate_ensembles_aggregates_samples() -> None:
    """Test the per-sample rows and their mean and spread."""
    rng = np.random.default_rng(2)
    ensembles = [ForecastEnsemble.from_trajectories(rng.gamma(2.0, 1.0, (40, 4))) for _ in range(3)]
    truths = [rng.gamma(2.0, 1.0, 4) for _ in range(3)]
    anchors = ["a", "b", "c"]
    report = evaluate_ensembles("diffusion", ensembles, truths, anchors)
    maes = [mae(e.median, y) for e, y in zip(ensembles, truths, strict=True)]
    assert [s.anchor for s in report.samples] == anchors
    assert report.mae == pytest.approx(np.mean(maes))
    assert report.mae_std == pytest.approx(np.std(maes))
    assert report.crossing_rate is None

    cumulative = evaluate_ensembles(
        "diffusion", ensembles, truths, anchors, cumulative=True, resolution_min=60
    )
    assert cumulative.cumulative
    first = ForecastEnsemble.from_trajectories(np.cumsum(ensembles[0].trajectories, axis=1))
    assert cumulative.samples[0].mae == pytest.approx(mae(first.median, np.cumsum(truths[0])))

    with pytest.raises(DataError):
        evaluate_ensembles("diffusion", ensembles, truths[:2], anchors)


def test_evaluate_quantile_tracks_counts_crossings() -> None:
    """Test scoring raw quantile tracks, crossings included."""
    truth = np.array([1.0, 2.0])
    ordered = np.array([[0.0, 1.0], [0.5, 1.5], [1.0, 2.0], [1.5, 2.5], [2.0, 3.0]])
    crossed = ordered[[0, 2, 1, 3, 4]]
    report = evaluate_quantile_tracks("qr", [ordered, crossed], [truth, truth], ["a", "b"])
    assert report.samples[0].crossing_rate == 0.0
    assert report.samples[1].crossing_rate == 0.25
    assert report.crossing_rate == pytest.approx(0.125)
    assert report.samples[0].mae == 0.0
    assert report.samples[0].coverage_90 == 1.0
    with pytest.raises(DataError):
        evaluate_quantile_tracks("qr", [ordered], [truth, truth], ["a", "b"])


def test_empty_report() -> None:
    """Test that a report needs at least one sample."""
    with pytest.raises(DomainError):
        EvalReport.from_samples("none", [])
