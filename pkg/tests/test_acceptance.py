"""End-to-end recovery checks on a synthetic corpus with a known generator.

These train a desk-scale model and take minutes of CPU; run them with `pytest -m slow`.
"""

from dataclasses import dataclass, replace

import numpy as np
import pandas as pd
import pytest

from chargecast.config import RunConfig, load_config
from chargecast.data import (
    ForecastWindow,
    NormalizationStats,
    SyntheticCorpus,
    aggregate_sessions,
    align_weather,
    build_windows,
    fit_stats,
    generate_synthetic,
    ideal_ensemble,
    normalize,
    split_windows,
)
from chargecast.evaluation import climatology_forecast, crps_profile, cumulative_energy, mae
from chargecast.model import DenoiserConfig, DenoiserParams
from chargecast.schedule import NoiseSchedule, build_quadratic_schedule
from chargecast.training import (
    EpochLoss,
    ensemble_medians,
    finetune,
    forecast_windows,
    pretrain,
)

pytestmark = pytest.mark.slow

TEST_WINDOWS = 30
DEVIATION_WINDOWS = 60


@dataclass
class Trained:
    cfg: RunConfig
    corpus: SyntheticCorpus
    train: list[ForecastWindow]
    test: list[ForecastWindow]
    stats: NormalizationStats
    schedule: NoiseSchedule
    params: DenoiserParams
    curve: list[EpochLoss]


@pytest.fixture(scope="module")
def trained() -> Trained:
    cfg = load_config(
        None,
        {
            "window.resolution_min": 60,
            "window.history_days": 1,
            "schedule.steps": 50,
            "model.hidden_dim": 16,
            "model.head_count": 4,
            "training.pretrain_epochs": 60,
            "training.finetune_epochs": 5,
            "training.finetune_ensemble_size": 8,
            "sampler.ensemble_size": 100,
            "sampler.workers": 4,
            "synthetic.days": 560,
        },
    )
    corpus = generate_synthetic(cfg.synthetic)
    start = pd.Timestamp(cfg.synthetic.start)
    end = start + pd.Timedelta(days=cfg.synthetic.days)
    load = aggregate_sessions(corpus.sessions, 60, start, end)
    weather = align_weather(corpus.weather, 60)
    windows = build_windows(load, weather, corpus.sessions, cfg.window)
    train, test = split_windows(windows, start + pd.Timedelta(days=510), cfg.window)
    assert len(train) >= 500

    stats = fit_stats(train)
    schedule = build_quadratic_schedule(
        cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end
    )
    params = DenoiserParams(DenoiserConfig.from_run_config(cfg), seed=cfg.model.seed)
    curve = pretrain([normalize(w, stats) for w in train], params, schedule, cfg.training)
    return Trained(cfg, corpus, train, test[:TEST_WINDOWS], stats, schedule, params, curve)


def _scores(trained: Trained, params: DenoiserParams) -> tuple[float, float]:
    ensembles = forecast_windows(
        trained.test, params, trained.schedule, trained.cfg.sampler, trained.stats
    )
    maes = [mae(e.median, w.target) for e, w in zip(ensembles, trained.test, strict=True)]
    crpss = [
        crps_profile(e.trajectories, w.target)
        for e, w in zip(ensembles, trained.test, strict=True)
    ]
    return float(np.mean(maes)), float(np.mean(crpss))


def test_pretrained_model_recovers_the_generator(trained: Trained) -> None:
    """Test CRPS against the oracle ensemble and MAE against climatology."""
    model_mae, model_crps = _scores(trained, trained.params)
    ideal = np.mean(
        [
            crps_profile(ideal_ensemble(trained.corpus, w.anchor, 100, 60, seed=1), w.target)
            for w in trained.test
        ]
    )
    clim = climatology_forecast(trained.train)
    clim_mae = np.mean([mae(clim, w.target) for w in trained.test])
    assert model_crps <= 1.5 * ideal
    assert model_mae < clim_mae


def test_pretraining_lowers_the_loss(trained: Trained) -> None:
    """Test that the last pretraining epoch ends below the first."""
    assert len(trained.curve) == trained.cfg.training.pretrain_epochs
    assert trained.curve[-1].loss < trained.curve[0].loss


def _median_deviation(trained: Trained, params: DenoiserParams) -> float:
    """Mean absolute gap between the normalized ensemble median and the measured profile."""
    windows = [normalize(w, trained.stats) for w in trained.train[:DEVIATION_WINDOWS]]
    medians = ensemble_medians(
        windows,
        params,
        trained.schedule,
        trained.cfg.sampler.ensemble_size,
        seed=3,
        workers=trained.cfg.sampler.workers,
    )
    targets = np.stack([w.target for w in windows])
    return float(np.mean(np.abs(medians - targets)))


def test_finetuning_keeps_the_median_accurate(trained: Trained) -> None:
    """Test that refinement pulls the median toward the data without costing over 2% MAE."""
    before, _ = _scores(trained, trained.params)
    deviation_before = _median_deviation(trained, trained.params)
    refined = trained.params.copy()
    finetune(
        [normalize(w, trained.stats) for w in trained.train],
        refined,
        trained.schedule,
        trained.cfg.training,
        workers=trained.cfg.sampler.workers,
    )
    after, _ = _scores(trained, refined)
    assert after <= 1.02 * before
    assert _median_deviation(trained, refined) < deviation_before


def test_more_evs_mean_more_energy(trained: Trained) -> None:
    """Test that scaling the EV count raises the predicted daily energy."""
    energy = []
    for scale in (0.5, 1.0, 1.5):
        ensembles = forecast_windows(
            trained.test,
            trained.params,
            trained.schedule,
            trained.cfg.sampler,
            trained.stats,
            ev_count_scale=scale,
        )
        energy.append(np.mean([cumulative_energy(e.median, 60)[-1] for e in ensembles]))
    assert energy[0] <= energy[1] <= energy[2]


def test_covariates_sharpen_the_forecast(trained: Trained) -> None:
    """Test that masking the covariates costs CRPS."""
    blind_cfg = replace(DenoiserConfig.from_run_config(trained.cfg), use_covariates=False)
    blind = DenoiserParams(blind_cfg, seed=trained.cfg.model.seed)
    pretrain(
        [normalize(w, trained.stats) for w in trained.train],
        blind,
        trained.schedule,
        trained.cfg.training,
    )
    _, with_covariates = _scores(trained, trained.params)
    _, without = _scores(trained, blind)
    assert without > with_covariates
