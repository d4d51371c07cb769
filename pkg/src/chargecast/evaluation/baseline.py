"""Reference forecasters: direct quantile regression and climatology."""

from __future__ import annotations

import logging
from collections.abc import Sequence

import numpy as np
from numpy.typing import NDArray

from ..data.windows import ForecastWindow, NormalizationStats, denormalize_load, normalize
from ..errors import ConfigurationError, DomainError, TrainingError
from ..model import (
    ConditionEncoder,
    ConditionSet,
    DenoiserConfig,
    ForecastHead,
    apply_condition_encoder,
    collate,
)
from ..nn import AdamState, ParamTensor, Tensor, adam_step
from ..nn.tensor import mean, mul, reshape, sub
from .metrics import LEVELS

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]


class QuantileBaseline:
    """Condition encoder and forecast head emitting one track per quantile level."""

    def __init__(
        self, cfg: DenoiserConfig, levels: Sequence[float] = LEVELS, seed: int = 0
    ) -> None:
        rng = np.random.default_rng(seed)
        self.config = cfg
        self.levels = tuple(levels)
        self.encoder = ConditionEncoder(cfg, rng, "baseline.condition_encoder")
        self.head = ForecastHead(
            cfg, cfg.condition_tokens, len(self.levels) * cfg.horizon, rng, "baseline.head"
        )

    def parameters(self) -> dict[str, ParamTensor]:
        return {p.name: p for p in [*self.encoder.parameters(), *self.head.parameters()]}

    def __call__(self, cond: ConditionSet) -> Tensor:
        """Normalized quantile tracks, shaped (..., levels, tau)."""
        latent = apply_condition_encoder(self.encoder, cond, self.config)
        out = self.head(latent)
        return reshape(out, (*out.shape[:-1], len(self.levels), self.config.horizon))

    def predict(
        self, windows: Sequence[ForecastWindow], stats: NormalizationStats
    ) -> list[Array]:
        """Quantile tracks in kW for physical-unit windows, exactly as the network emits them."""
        if not windows:
            return []
        _, cond = collate([normalize(w, stats) for w in windows])
        tracks = denormalize_load(self(cond).data, stats)
        return list(tracks)


def pinball_objective(pred: Tensor, target: Array, levels: Sequence[float]) -> Tensor:
    """Mean pinball loss summed over levels; the kink uses the subgradient at zero."""
    q = np.asarray(levels, dtype=float)[:, None]
    residual = sub(target[..., None, :], pred)
    slope = np.where(residual.data >= 0, q, q - 1.0)
    return mul(mean(mul(residual, slope)), float(len(levels)))


def train_quantile_baseline(
    windows: Sequence[ForecastWindow],
    cfg: DenoiserConfig,
    *,
    epochs: int,
    learning_rate: float = 0.001,
    batch_size: int = 16,
    seed: int = 0,
) -> tuple[QuantileBaseline, list[float]]:
    """Fit the baseline on normalized windows with summed pinball losses."""
    if not windows:
        raise DomainError("baseline training needs at least one window")
    if not all(w.normalized for w in windows):
        raise ConfigurationError("baseline training expects normalized windows")
    model = QuantileBaseline(cfg, seed=seed)
    params = model.parameters()
    state = AdamState(learning_rate=learning_rate)
    rng = np.random.default_rng([seed, 2])
    x0, cond = collate(windows)
    curve = []
    for epoch in range(1, epochs + 1):
        total = 0.0
        order = rng.permutation(len(windows))
        for start in range(0, len(order), batch_size):
            idx = order[start : start + batch_size]
            loss = pinball_objective(model(cond.take(idx)), x0[idx], model.levels)
            value = loss.item()
            if not np.isfinite(value):
                raise TrainingError(
                    f"baseline loss diverged at epoch {epoch}", stage="baseline", epoch=epoch
                )
            loss.backward()
            try:
                adam_step(params, state)
            except TrainingError as exc:
                raise TrainingError(
                    str(exc), stage="baseline", epoch=epoch, parameter=exc.parameter
                ) from exc
            total += value * len(idx)
        curve.append(total / len(windows))
        logger.info(f"baseline epoch {epoch}/{epochs}: pinball {curve[-1]:.6f}")
    return model, curve


def climatology_forecast(windows: Sequence[ForecastWindow]) -> Array:
    """Per-step mean of the training targets, in the windows' units."""
    if not windows:
        raise DomainError("climatology needs at least one training window")
    return np.mean(np.stack([w.target for w in windows]), axis=0)
