"""Tests for report, ensemble and plot outputs."""

from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from chargecast.errors import ConfigurationError
from chargecast.evaluation.metrics import ForecastEnsemble, evaluate_ensembles
from chargecast.evaluation.report import (
    SCORE_COLUMNS,
    plot_bands,
    report_frame,
    summary_text,
    write_ensemble_csv,
    write_report,
)


@pytest.fixture
def ensembles() -> list[ForecastEnsemble]:
    rng = np.random.default_rng(4)
    return [ForecastEnsemble.from_trajectories(rng.gamma(2.0, 1.0, (25, 6))) for _ in range(3)]


@pytest.fixture
def truths() -> list[np.ndarray]:
    rng = np.random.default_rng(5)
    return [rng.gamma(2.0, 1.0, 6) for _ in range(3)]


def test_report_frame_has_footer(
    ensembles: list[ForecastEnsemble], truths: list[np.ndarray]
) -> None:
    """Test per-sample rows followed by mean and std rows."""
    report = evaluate_ensembles("diffusion", ensembles, truths, ["d1", "d2", "d3"])
    frame = report_frame(report)
    assert list(frame["anchor"]) == ["d1", "d2", "d3", "mean", "std"]
    assert set(SCORE_COLUMNS) <= set(frame.columns)
    assert frame.loc[3, "mae"] == pytest.approx(report.mae)
    assert frame.loc[4, "crps"] == pytest.approx(report.crps_std)
    assert (frame["model"] == "diffusion").all()


def test_write_report(
    tmp_path: Path, ensembles: list[ForecastEnsemble], truths: list[np.ndarray]
) -> None:
    """Test the CSV and text summary written for several reports."""
    anchors = ["d1", "d2", "d3"]
    reports = [
        evaluate_ensembles("diffusion", ensembles, truths, anchors),
        evaluate_ensembles("diffusion", ensembles, truths, anchors, ev_count_scale=1.5),
    ]
    csv_path, text_path = write_report(reports, tmp_path / "out", '{"seed": 0}')
    frame = pd.read_csv(csv_path)
    assert len(frame) == 10
    assert sorted(frame["ev_count_scale"].unique()) == [1.0, 1.5]
    text = text_path.read_text()
    assert "diffusion (EV count x1.5, 3 samples)" in text
    assert text.endswith('effective configuration:\n{"seed": 0}\n')
    assert summary_text(reports, "{}").count("CRPS") == 2
    with pytest.raises(ConfigurationError):
        write_report([], tmp_path, "{}")


def test_write_ensemble_csv(tmp_path: Path, ensembles: list[ForecastEnsemble]) -> None:
    """Test one row per trajectory with its anchor and member index."""
    path = write_ensemble_csv(tmp_path / "ensembles.csv", ensembles, ["a", "b", "c"])
    frame = pd.read_csv(path)
    assert len(frame) == 75
    assert list(frame.columns[:3]) == ["anchor", "member", "step_0"]
    assert frame.loc[25, "anchor"] == "b"
    assert frame.loc[25, "member"] == 0
    np.testing.assert_allclose(
        frame.loc[26, [f"step_{i}" for i in range(6)]].to_numpy(dtype=float),
        ensembles[1].trajectories[1],
        atol=1e-6,
    )


def test_plot_bands_is_reproducible(
    tmp_path: Path, ensembles: list[ForecastEnsemble], truths: list[np.ndarray]
) -> None:
    """Test that the band plot is an SVG and identical across runs."""
    first = plot_bands(tmp_path / "a.svg", ensembles[0], truth=truths[0], title="d1")
    second = plot_bands(tmp_path / "b.svg", ensembles[0], truth=truths[0], title="d1")
    body = first.read_text()
    assert body.lstrip().startswith("<?xml")
    assert "<svg" in body
    assert first.read_bytes() == second.read_bytes()
