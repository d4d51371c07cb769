"""Pretraining, median-guided fine-tuning and the three-stage pipeline."""

from __future__ import annotations

import logging
from collections.abc import Iterator, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .config import RunConfig, SamplerConfig, TrainingConfig
from .data.windows import ForecastWindow, NormalizationStats, fit_stats, normalize
from .diffusion import epsilon_loss, finetune_loss, generate_normalized, sample_ensembles
from .errors import ConfigurationError, DomainError, TrainingError
from .evaluation.metrics import ForecastEnsemble
from .model import ConditionSet, DenoiserConfig, DenoiserParams, collate
from .nn import AdamState, ParamTensor, adam_step
from .schedule import NoiseSchedule, build_quadratic_schedule

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochLoss:
    stage: str
    epoch: int
    loss: float


def write_loss_csv(curve: Sequence[EpochLoss], path: Path) -> Path:
    frame = pd.DataFrame(
        [(e.epoch, e.stage, e.loss) for e in curve], columns=["epoch", "stage", "loss"]
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")
    logger.info(f"Wrote training curve {path}")
    return path


def _batches(
    windows: Sequence[ForecastWindow], batch_size: int, rng: np.random.Generator
) -> Iterator[np.ndarray]:
    order = rng.permutation(len(windows))
    for start in range(0, len(order), batch_size):
        yield order[start : start + batch_size]


def _update(
    trainable: Mapping[str, ParamTensor],
    state: AdamState,
    stage: str,
    epoch: int,
    loss: float,
) -> None:
    if not np.isfinite(loss):
        raise TrainingError(f"{stage} loss diverged at epoch {epoch}", stage=stage, epoch=epoch)
    try:
        adam_step(trainable, state)
    except TrainingError as exc:
        raise TrainingError(
            f"{stage} epoch {epoch}: {exc}", stage=stage, epoch=epoch, parameter=exc.parameter
        ) from exc


def _check_windows(windows: Sequence[ForecastWindow]) -> None:
    if not windows:
        raise DomainError("training needs at least one window")
    if not all(w.normalized for w in windows):
        raise ConfigurationError("training expects normalized windows")


def pretrain(
    windows: Sequence[ForecastWindow],
    params: DenoiserParams,
    sched: NoiseSchedule,
    cfg: TrainingConfig,
) -> list[EpochLoss]:
    """Stage 1: fit every parameter with the denoising loss."""
    _check_windows(windows)
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(learning_rate=cfg.pretrain_lr)
    trainable = params.parameters()
    curve = []
    for epoch in range(1, cfg.pretrain_epochs + 1):
        total = 0.0
        for idx in _batches(windows, cfg.batch_size, rng):
            params.zero_grad()
            loss = epsilon_loss([windows[i] for i in idx], params, sched, rng)
            _update(trainable, state, "pretrain", epoch, loss)
            total += loss * len(idx)
        curve.append(EpochLoss("pretrain", epoch, total / len(windows)))
        logger.info(f"pretrain epoch {epoch}/{cfg.pretrain_epochs}: loss {curve[-1].loss:.6f}")
    return curve


def ensemble_medians(
    windows: Sequence[ForecastWindow],
    params: DenoiserParams,
    sched: NoiseSchedule,
    members: int,
    *,
    seed: int,
    workers: int = 1,
    chunk_size: int = 250,
) -> np.ndarray:
    """Per-step median of `members` generated trajectories for each window (normalized)."""
    _, cond = collate(windows)
    generated = generate_normalized(
        cond, params, sched, members, seed=seed, workers=workers, chunk_size=chunk_size
    )
    return np.median(generated, axis=1)


def finetune(
    windows: Sequence[ForecastWindow],
    params: DenoiserParams,
    sched: NoiseSchedule,
    cfg: TrainingConfig,
    *,
    observed_prefix: int = 0,
    workers: int = 1,
    chunk_size: int = 250,
) -> list[EpochLoss]:
    """Stage 2: refine the configured components with denoising plus QDM loss.

    Components outside `cfg.finetune_components` are frozen for the duration.
    """
    _check_windows(windows)
    if cfg.finetune_epochs == 0:
        return []
    trainable = params.parameters(cfg.finetune_components)
    if not trainable:
        raise ConfigurationError(
            f"components {cfg.finetune_components} hold no parameters in this model"
        )
    frozen = [p for name, p in params.parameters().items() if name not in trainable]
    for p in frozen:
        p.requires_grad = False

    rng = np.random.default_rng([cfg.seed, 1])
    state = AdamState(learning_rate=cfg.finetune_lr)
    x0_all, cond_all = collate(windows)
    curve = []
    medians: np.ndarray | None = None
    try:
        for epoch in range(1, cfg.finetune_epochs + 1):
            if medians is None or cfg.median_refresh == "epoch":
                medians = ensemble_medians(
                    windows,
                    params,
                    sched,
                    cfg.finetune_ensemble_size,
                    seed=cfg.seed + epoch,
                    workers=workers,
                    chunk_size=chunk_size,
                )
                gap = float(np.mean(np.abs(medians - x0_all)))
                logger.info(f"finetune epoch {epoch}: refreshed medians, mean deviation {gap:.6f}")
            total = 0.0
            for idx in _batches(windows, cfg.batch_size, rng):
                params.zero_grad()
                loss = finetune_loss(
                    x0_all[idx],
                    medians[idx],
                    cond_all.take(idx),
                    params,
                    sched,
                    rng,
                    weight=cfg.qdm_weight,
                    detach_target=cfg.qdm_gradient == "detached",
                    observed_prefix=observed_prefix,
                )
                _update(trainable, state, "finetune", epoch, loss)
                total += loss * len(idx)
            curve.append(EpochLoss("finetune", epoch, total / len(windows)))
            logger.info(
                f"finetune epoch {epoch}/{cfg.finetune_epochs}: loss {curve[-1].loss:.6f}"
            )
    finally:
        for p in frozen:
            p.requires_grad = True
    return curve


@dataclass
class PipelineResult:
    params: DenoiserParams
    stats: NormalizationStats
    schedule: NoiseSchedule
    curve: list[EpochLoss] = field(default_factory=list)
    ensembles: list[ForecastEnsemble] = field(default_factory=list)


def forecast_windows(
    windows: Sequence[ForecastWindow],
    params: DenoiserParams,
    sched: NoiseSchedule,
    cfg: SamplerConfig,
    stats: NormalizationStats,
    *,
    ev_count_scale: float = 1.0,
) -> list[ForecastEnsemble]:
    """Ensembles for physical-unit windows, with the observed prefix taken from each target."""
    if not windows:
        return []
    normalized = [normalize(w, stats) for w in windows]
    cond = ConditionSet.stack([ConditionSet.from_window(w) for w in normalized])
    if ev_count_scale != 1.0:
        raw = np.array([w.ev_count * ev_count_scale for w in windows])
        cond = cond.with_ev_count((raw - stats.ev_count_mean) / stats.ev_count_std)
    observed = np.stack([w.target for w in windows]) if cfg.observed_prefix else None
    return sample_ensembles(cond, params, sched, cfg, stats, observed=observed)


def run_pipeline(
    train: Sequence[ForecastWindow],
    test: Sequence[ForecastWindow],
    cfg: RunConfig,
) -> PipelineResult:
    """Pretrain, fine-tune and forecast the test windows.

    `train` and `test` are in physical units; statistics are fitted on `train` only.
    """
    stats = fit_stats(train)
    train_n = [normalize(w, stats) for w in train]
    sched = build_quadratic_schedule(
        cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end
    )
    params = DenoiserParams(DenoiserConfig.from_run_config(cfg), seed=cfg.model.seed)
    curve = pretrain(train_n, params, sched, cfg.training)
    curve += finetune(
        train_n,
        params,
        sched,
        cfg.training,
        observed_prefix=cfg.sampler.observed_prefix,
        workers=cfg.sampler.workers,
        chunk_size=cfg.sampler.chunk_size,
    )
    ensembles = forecast_windows(test, params, sched, cfg.sampler, stats)
    return PipelineResult(params, stats, sched, curve, ensembles)
