"""Run configuration loaded from a TOML file, environment variables and CLI overrides."""

from __future__ import annotations

import contextvars
import json
from datetime import date
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from .errors import ConfigurationError

Component = Literal["perturbation_encoder", "condition_encoder", "cross_attention", "forecast_head"]
COMPONENTS: tuple[Component, ...] = (
    "perturbation_encoder",
    "condition_encoder",
    "cross_attention",
    "forecast_head",
)


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataConfig(Section):
    sessions_csv: Path | None = None
    weather_csv: Path | None = None
    # first day whose windows are held out; None splits off the last `test_fraction` of days
    test_start: date | None = None
    test_fraction: float = Field(default=0.2, gt=0.0, lt=1.0)


class WindowConfig(Section):
    resolution_min: int = 15
    history_days: int = Field(default=5, ge=1)
    horizon_steps: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check(self) -> WindowConfig:
        if self.resolution_min not in (15, 30, 60):
            raise ValueError(f"resolution_min must be 15, 30 or 60, got {self.resolution_min}")
        if self.history % self.horizon != 0:
            raise ValueError(
                f"history length {self.history} must be a multiple of the horizon {self.horizon}"
            )
        return self

    @property
    def steps_per_day(self) -> int:
        return 1440 // self.resolution_min

    @property
    def horizon(self) -> int:
        """tau, the number of forecast steps."""
        return self.horizon_steps or self.steps_per_day

    @property
    def history(self) -> int:
        """omega, the number of history steps."""
        return self.history_days * self.steps_per_day


class ScheduleConfig(Section):
    steps: int = Field(default=200, ge=2)
    beta_start: float = 0.0001
    beta_end: float = 0.5

    @model_validator(mode="after")
    def _check(self) -> ScheduleConfig:
        if not 0.0 < self.beta_start < self.beta_end < 1.0:
            raise ValueError("schedule requires 0 < beta_start < beta_end < 1")
        return self


class ModelConfig(Section):
    hidden_dim: int = Field(default=32, ge=2)
    head_count: int = Field(default=4, ge=1)
    fusion: Literal["cross_attention", "addition"] = "cross_attention"
    use_covariates: bool = True
    seed: int = 0

    @model_validator(mode="after")
    def _check(self) -> ModelConfig:
        if self.hidden_dim % 2 != 0:
            raise ValueError("hidden_dim must be even for the sinusoidal step embedding")
        if self.hidden_dim % self.head_count != 0:
            raise ValueError(
                f"head_count {self.head_count} must divide hidden_dim {self.hidden_dim}"
            )
        return self


class TrainingConfig(Section):
    pretrain_lr: float = Field(default=0.001, gt=0.0)
    finetune_lr: float = Field(default=0.0002, gt=0.0)
    pretrain_epochs: int = Field(default=200, ge=0)
    finetune_epochs: int = Field(default=100, ge=0)
    batch_size: int = Field(default=16, ge=1)
    qdm_weight: float = Field(default=0.001, ge=0.0)
    finetune_components: tuple[Component, ...] = ("forecast_head",)
    finetune_ensemble_size: int = Field(default=16, ge=1)
    median_refresh: Literal["epoch", "once"] = "epoch"
    qdm_gradient: Literal["detached", "both"] = "detached"
    seed: int = 0

    @model_validator(mode="after")
    def _check(self) -> TrainingConfig:
        if not self.finetune_components:
            raise ValueError("finetune_components must name at least one component")
        return self


class SamplerConfig(Section):
    ensemble_size: int = Field(default=1000, ge=1)
    seed: int = 0
    observed_prefix: int = Field(default=0, ge=0)
    workers: int = Field(default=1, ge=1)
    chunk_size: int = Field(default=250, ge=1)


class SyntheticConfig(Section):
    days: int = Field(default=200, ge=1)
    start: date = date(2018, 1, 1)
    ev_count: float = Field(default=40.0, gt=0.0)
    weekend_factor: float = Field(default=0.6, gt=0.0)
    mean_energy_kwh: float = Field(default=8.0, gt=0.0)
    energy_shape: float = Field(default=4.0, gt=0.0)
    charger_kw: float = Field(default=6.6, gt=0.0)
    evening_share: float = Field(default=0.45, gt=0.0, lt=1.0)
    temperature_sensitivity: float = Field(default=0.03, ge=0.0)
    seed: int = 7


class EvaluationConfig(Section):
    ev_count_scales: tuple[float, ...] = (1.0,)
    cumulative: bool = False
    plot_windows: int = Field(default=1, ge=0)
    quantile_baseline: bool = True
    climatology: bool = True
    baseline_epochs: int = Field(default=50, ge=0)
    baseline_lr: float = Field(default=0.001, gt=0.0)


_config_file: contextvars.ContextVar[Path | None] = contextvars.ContextVar(
    "chargecast_config_file", default=None
)


class RunConfig(BaseSettings):
    """Every tunable of a chargecast run."""

    data: DataConfig = DataConfig()
    window: WindowConfig = WindowConfig()
    schedule: ScheduleConfig = ScheduleConfig()
    model: ModelConfig = ModelConfig()
    training: TrainingConfig = TrainingConfig()
    sampler: SamplerConfig = SamplerConfig()
    synthetic: SyntheticConfig = SyntheticConfig()
    evaluation: EvaluationConfig = EvaluationConfig()
    run_root: Path = Path("runs")

    model_config = SettingsConfigDict(
        env_prefix="CHARGECAST_",
        env_nested_delimiter="__",
        extra="forbid",
        frozen=True,
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> tuple[PydanticBaseSettingsSource, ...]:
        sources: list[PydanticBaseSettingsSource] = [init_settings, env_settings]
        path = _config_file.get()
        if path is not None:
            sources.append(TomlConfigSettingsSource(settings_cls, toml_file=path))
        return tuple(sources)

    @model_validator(mode="after")
    def _check(self) -> RunConfig:
        if self.sampler.observed_prefix >= self.window.horizon:
            raise ValueError(
                f"observed_prefix {self.sampler.observed_prefix} must be shorter than the "
                f"horizon {self.window.horizon}"
            )
        return self

    def effective_json(self) -> str:
        """The full configuration after defaults, as stable JSON."""
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True)


def _nest(overrides: dict[str, Any]) -> dict[str, Any]:
    """Expand dotted keys ("training.batch_size") into nested dictionaries."""
    nested: dict[str, Any] = {}
    for key, value in overrides.items():
        node = nested
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return nested


def load_config(
    path: Path | str | None = None, overrides: dict[str, Any] | None = None
) -> RunConfig:
    """Build a RunConfig; overrides beat environment variables, which beat the file."""
    if path is not None and not Path(path).is_file():
        raise ConfigurationError(f"config file not found: {path}")
    token = _config_file.set(Path(path) if path is not None else None)
    try:
        return RunConfig(**_nest(overrides or {}))
    finally:
        _config_file.reset(token)
