"""Conditional noise predictor eps_theta(x_t, p, r, t).

Four components, each owning a disjoint set of parameters:

* perturbation encoder: LSTM over x_t, sinusoidal step embedding through a linear layer
  broadcast-added to every step, then self-attention;
* condition encoder: LSTM over the day-aligned temporal channels (history lags,
  temperature, humidity), a linear layer for the calendar one-hot and EV count that becomes
  one extra token, then self-attention over all tokens;
* cross-attention: queries from the condition tokens, keys and values from the
  perturbation latent;
* forecast head: self-attention and a linear projection of the flattened tokens to tau.

With `fusion="addition"` the cross-attention is replaced by element-wise addition of the
two latents and owns no parameters.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import COMPONENTS, Component, RunConfig
from .data.windows import WEEKDAYS, ForecastWindow
from .errors import ConfigurationError, DataError, DomainError, ModelError
from .nn import LSTM, Linear, MultiHeadAttention, ParamTensor, Tensor
from .nn.tensor import add, as_tensor, concat, getitem, reshape

Array = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class ConditionSet:
    """Normalized conditions c = {p, u, v, d, e}, optionally with a leading batch axis."""

    p: Array
    u: Array
    v: Array
    d: Array
    e: Array

    def __post_init__(self) -> None:
        batch = self.p.shape[:-1]
        if self.u.shape != self.v.shape or self.u.shape[:-1] != batch:
            raise DataError("temperature and humidity must share the horizon length")
        if self.d.shape != (*batch, WEEKDAYS):
            raise DataError(f"day-of-week vector must have {WEEKDAYS} entries")
        if np.shape(self.e) != batch:
            raise DataError("EV count must be one scalar per sample")
        ones = np.count_nonzero(self.d == 1.0, axis=-1)
        nonzero = np.count_nonzero(self.d, axis=-1)
        if np.any(ones != 1) or np.any(nonzero != 1):
            raise DataError("day-of-week vector must be one-hot")

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.p.shape[:-1]

    @classmethod
    def from_window(cls, window: ForecastWindow) -> ConditionSet:
        if not window.normalized:
            raise ConfigurationError("conditions must be built from normalized windows")
        return cls(
            p=window.history,
            u=window.temperature,
            v=window.humidity,
            d=window.weekday,
            e=np.asarray(window.ev_count, dtype=float),
        )

    @classmethod
    def stack(cls, conditions: Sequence[ConditionSet]) -> ConditionSet:
        return cls(
            p=np.stack([c.p for c in conditions]),
            u=np.stack([c.u for c in conditions]),
            v=np.stack([c.v for c in conditions]),
            d=np.stack([c.d for c in conditions]),
            e=np.stack([np.asarray(c.e, dtype=float) for c in conditions]),
        )

    def take(self, index: ArrayLike) -> ConditionSet:
        """Select (and possibly repeat) batch rows."""
        idx = np.asarray(index)
        return ConditionSet(self.p[idx], self.u[idx], self.v[idx], self.d[idx], self.e[idx])

    def with_ev_count(self, e: ArrayLike) -> ConditionSet:
        return ConditionSet(self.p, self.u, self.v, self.d, np.asarray(e, dtype=float))


def collate(windows: Sequence[ForecastWindow]) -> tuple[Array, ConditionSet]:
    """Stack normalized windows into (x0 batch, condition batch)."""
    if not windows:
        raise DomainError("cannot collate an empty batch")
    x0 = np.stack([w.target for w in windows])
    return x0, ConditionSet.stack([ConditionSet.from_window(w) for w in windows])


@dataclass(frozen=True)
class DenoiserConfig:
    horizon: int
    history: int
    steps: int
    hidden_dim: int = 32
    head_count: int = 4
    fusion: Literal["cross_attention", "addition"] = "cross_attention"
    use_covariates: bool = True

    def __post_init__(self) -> None:
        if self.horizon < 1 or self.history < self.horizon or self.history % self.horizon:
            raise ConfigurationError(
                f"history {self.history} must be a positive multiple of horizon {self.horizon}"
            )
        if self.hidden_dim % 2 or self.hidden_dim % self.head_count:
            raise ConfigurationError(
                f"hidden_dim {self.hidden_dim} must be even and divisible by {self.head_count}"
            )
        if self.steps < 2:
            raise ConfigurationError("the denoiser needs at least 2 diffusion steps")

    @property
    def lags(self) -> int:
        """History days aligned to each forecast step."""
        return self.history // self.horizon

    @property
    def condition_tokens(self) -> int:
        return self.horizon + 1

    def to_dict(self) -> dict[str, object]:
        return asdict(self)

    @classmethod
    def from_run_config(cls, cfg: RunConfig) -> DenoiserConfig:
        return cls(
            horizon=cfg.window.horizon,
            history=cfg.window.history,
            steps=cfg.schedule.steps,
            hidden_dim=cfg.model.hidden_dim,
            head_count=cfg.model.head_count,
            fusion=cfg.model.fusion,
            use_covariates=cfg.model.use_covariates,
        )


class PerturbationEncoder:
    def __init__(self, cfg: DenoiserConfig, rng: np.random.Generator) -> None:
        h = cfg.hidden_dim
        self.lstm = LSTM(1, h, rng, "perturbation_encoder.lstm")
        self.step_linear = Linear(h, h, rng, "perturbation_encoder.step_linear")
        self.attention = MultiHeadAttention(
            h, cfg.head_count, rng, "perturbation_encoder.attention"
        )

    def parameters(self) -> list[ParamTensor]:
        return [
            *self.lstm.parameters(),
            *self.step_linear.parameters(),
            *self.attention.parameters(),
        ]


class ConditionEncoder:
    def __init__(self, cfg: DenoiserConfig, rng: np.random.Generator, prefix: str) -> None:
        h = cfg.hidden_dim
        self.lstm = LSTM(cfg.lags + 2, h, rng, f"{prefix}.lstm")
        self.static_linear = Linear(WEEKDAYS + 1, h, rng, f"{prefix}.static_linear")
        self.attention = MultiHeadAttention(h, cfg.head_count, rng, f"{prefix}.attention")

    def parameters(self) -> list[ParamTensor]:
        return [
            *self.lstm.parameters(),
            *self.static_linear.parameters(),
            *self.attention.parameters(),
        ]


class ForecastHead:
    def __init__(
        self,
        cfg: DenoiserConfig,
        tokens: int,
        out_dim: int,
        rng: np.random.Generator,
        prefix: str,
    ) -> None:
        h = cfg.hidden_dim
        self.attention = MultiHeadAttention(h, cfg.head_count, rng, f"{prefix}.attention")
        self.projection = Linear(tokens * h, out_dim, rng, f"{prefix}.projection")
        self.tokens = tokens

    def __call__(self, latent: Tensor) -> Tensor:
        mixed = self.attention(latent)
        flat = reshape(mixed, (*mixed.shape[:-2], mixed.shape[-2] * mixed.shape[-1]))
        return self.projection(flat)

    def parameters(self) -> list[ParamTensor]:
        return [*self.attention.parameters(), *self.projection.parameters()]


class DenoiserParams:
    """All learnable parameters theta, partitioned by component."""

    def __init__(self, cfg: DenoiserConfig, seed: int = 0) -> None:
        rng = np.random.default_rng(seed)
        self.config = cfg
        self.perturbation_encoder = PerturbationEncoder(cfg, rng)
        self.condition_encoder = ConditionEncoder(cfg, rng, "condition_encoder")
        self.cross_attention: MultiHeadAttention | None = None
        if cfg.fusion == "cross_attention":
            self.cross_attention = MultiHeadAttention(
                cfg.hidden_dim, cfg.head_count, rng, "cross_attention"
            )
            tokens = cfg.condition_tokens
        else:
            tokens = cfg.horizon
        self.forecast_head = ForecastHead(cfg, tokens, cfg.horizon, rng, "forecast_head")

    def components(self) -> dict[Component, list[ParamTensor]]:
        return {
            "perturbation_encoder": self.perturbation_encoder.parameters(),
            "condition_encoder": self.condition_encoder.parameters(),
            "cross_attention": (
                self.cross_attention.parameters() if self.cross_attention is not None else []
            ),
            "forecast_head": self.forecast_head.parameters(),
        }

    def parameters(self, components: Sequence[Component] = COMPONENTS) -> dict[str, ParamTensor]:
        parts = self.components()
        return {p.name: p for c in components for p in parts[c]}

    def zero_grad(self) -> None:
        for p in self.parameters().values():
            p.zero_grad()

    def state_dict(self) -> dict[str, Array]:
        return {name: p.data.copy() for name, p in self.parameters().items()}

    def load_state_dict(self, state: dict[str, Array]) -> None:
        params = self.parameters()
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise ConfigurationError(
                f"parameter mismatch: missing {missing[:3]}, unexpected {unexpected[:3]}"
            )
        for name, p in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != p.data.shape:
                raise ConfigurationError(
                    f"parameter {name}: expected shape {p.data.shape}, got {value.shape}"
                )
            p.data = value.copy()
            p.zero_grad()

    def copy(self) -> DenoiserParams:
        clone = DenoiserParams(self.config)
        clone.load_state_dict(self.state_dict())
        return clone


def _check_step(t: ArrayLike, steps: int) -> Array:
    t_arr = np.asarray(t)
    if np.any(t_arr < 1) or np.any(t_arr > steps):
        raise DomainError(f"diffusion step out of range [1, {steps}]: {t}")
    return t_arr.astype(np.float64)


def sinusoidal_embedding(t: ArrayLike, width: int) -> Array:
    half = width // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / half)
    angles = np.asarray(t, dtype=np.float64)[..., None] * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=-1)


def embed_step(t: ArrayLike, params: DenoiserParams) -> Tensor:
    """Sinusoidal encoding of t through the perturbation encoder's linear layer."""
    t_arr = _check_step(t, params.config.steps)
    basis = sinusoidal_embedding(t_arr, params.config.hidden_dim)
    return params.perturbation_encoder.step_linear(basis)


def encode_perturbation(x_t: ArrayLike | Tensor, t: ArrayLike, params: DenoiserParams) -> Tensor:
    """Latent of the noised profile, shaped (..., tau, H)."""
    x = as_tensor(x_t)
    tau = params.config.horizon
    if x.shape[-1] != tau:
        raise ConfigurationError(f"x_t has length {x.shape[-1]}, expected horizon {tau}")
    enc = params.perturbation_encoder
    hidden = enc.lstm(reshape(x, (*x.shape, 1)))
    emb = embed_step(t, params)
    emb = reshape(emb, (*emb.shape[:-1], 1, emb.shape[-1]))
    return enc.attention(add(hidden, emb))


def condition_inputs(cond: ConditionSet, cfg: DenoiserConfig) -> tuple[Array, Array]:
    tau, lags = cfg.horizon, cfg.lags
    if cond.p.shape[-1] != cfg.history:
        raise DataError(f"history has length {cond.p.shape[-1]}, expected {cfg.history}")
    if cond.u.shape[-1] != tau:
        raise DataError(f"weather covariates have length {cond.u.shape[-1]}, expected {tau}")
    batch = cond.batch_shape
    # day-aligned lags: channel k holds history day k (oldest first) at each forecast step
    lagged = np.swapaxes(cond.p.reshape(*batch, lags, tau), -1, -2)
    u, v = cond.u, cond.v
    d, e = cond.d, np.asarray(cond.e, dtype=float)
    if not cfg.use_covariates:
        u, v, d, e = np.zeros_like(u), np.zeros_like(v), np.zeros_like(d), np.zeros_like(e)
    temporal = np.concatenate([lagged, u[..., None], v[..., None]], axis=-1)
    static = np.concatenate([d, e[..., None]], axis=-1)
    return temporal, static


def apply_condition_encoder(
    encoder: ConditionEncoder, cond: ConditionSet, cfg: DenoiserConfig
) -> Tensor:
    temporal, static = condition_inputs(cond, cfg)
    hidden = encoder.lstm(temporal)
    token = encoder.static_linear(static)
    token = reshape(token, (*token.shape[:-1], 1, token.shape[-1]))
    return encoder.attention(concat([hidden, token], axis=-2))


def encode_condition(cond: ConditionSet, params: DenoiserParams) -> Tensor:
    """Latent of the conditions, shaped (..., tau + 1, H): tau temporal tokens and one static."""
    return apply_condition_encoder(params.condition_encoder, cond, params.config)


def predict_noise(
    x_t: ArrayLike | Tensor,
    cond: ConditionSet,
    t: ArrayLike,
    params: DenoiserParams,
    cond_latent: Tensor | None = None,
) -> Tensor:
    """eps_theta(x_t, c, t), shaped like x_t.

    `cond_latent` may carry a precomputed `encode_condition(cond, params)`.
    """
    perturbation = encode_perturbation(x_t, t, params)
    latent = cond_latent if cond_latent is not None else encode_condition(cond, params)
    tau = params.config.horizon
    if params.cross_attention is not None:
        fused = params.cross_attention(latent, perturbation)
    else:
        temporal = getitem(latent, (..., slice(0, tau), slice(None)))
        static = getitem(latent, (..., slice(tau, tau + 1), slice(None)))
        fused = add(add(perturbation, temporal), static)
    out = params.forecast_head(fused)
    if not np.all(np.isfinite(out.data)):
        raise ModelError("noise predictor produced a non-finite output")
    return out

