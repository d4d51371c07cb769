"""Forward perturbation, ancestral sampling and the training objectives."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .config import SamplerConfig
from .data.windows import ForecastWindow, NormalizationStats, denormalize_load, normalize_load
from .errors import ConfigurationError, DomainError, ModelError, SamplingError
from .evaluation.metrics import ForecastEnsemble
from .model import ConditionSet, DenoiserParams, collate, encode_condition, predict_noise
from .nn import Tensor, no_grad
from .nn.tensor import add, mean, mul, square, sub, sum_
from .schedule import NoiseSchedule

logger = logging.getLogger(__name__)

Array = NDArray[np.float64]
Predictor = Callable[[ArrayLike, ConditionSet, ArrayLike, DenoiserParams], Tensor]
RandomSource = np.random.Generator | Sequence[np.random.Generator]

__all__ = [
    "PerturbedProfile",
    "SamplerConfig",
    "epsilon_loss",
    "finetune_loss",
    "forward_perturb",
    "generate_normalized",
    "qdm_loss",
    "reverse_step",
    "sample_ensemble",
    "sample_ensembles",
    "weighted_refinement",
]


def _per_sample(values: ArrayLike, target_ndim: int) -> Array:
    """Give per-sample schedule values trailing axes so they broadcast over steps."""
    values = np.asarray(values)
    while values.ndim < target_ndim:
        values = values[..., None]
    return values


def _alpha(sched: NoiseSchedule, t: ArrayLike) -> Array:
    if np.any(np.asarray(t) < 1):
        raise DomainError(f"diffusion step out of range [1, {sched.steps}]: {t}")
    return np.asarray(sched.alpha_bar_at(t), dtype=float)


def forward_perturb(x0: ArrayLike, t: ArrayLike, eps: ArrayLike, sched: NoiseSchedule) -> Array:
    """sqrt(alpha_t) x0 + sqrt(1 - alpha_t) eps; `t` may hold one step per batch row."""
    x = np.asarray(x0, dtype=float)
    a = _per_sample(_alpha(sched, t), x.ndim)
    return np.sqrt(a) * x + np.sqrt(1.0 - a) * np.asarray(eps, dtype=float)


def reverse_step(
    x_t: ArrayLike, t: ArrayLike, eps_hat: ArrayLike, z: ArrayLike, sched: NoiseSchedule
) -> Array:
    """One ancestral step x_t -> x_{t-1}; the noise term is dropped at t = 1."""
    x = np.asarray(x_t, dtype=float)
    t_arr = np.asarray(t)
    beta = _per_sample(np.asarray(sched.beta_at(t_arr), dtype=float), x.ndim)
    a = _per_sample(_alpha(sched, t_arr), x.ndim)
    sigma = _per_sample(np.sqrt(sched.beta_tilde_at(t_arr)), x.ndim)
    noise = np.where(_per_sample(t_arr, x.ndim) > 1, np.asarray(z, dtype=float), 0.0)
    scaled = beta / np.sqrt(1.0 - a) * np.asarray(eps_hat, dtype=float)
    return (x - scaled) / np.sqrt(1.0 - beta) + sigma * noise


@dataclass(frozen=True, eq=False)
class PerturbedProfile:
    x_t: Array
    t: int
    eps: Array

    @classmethod
    def draw(
        cls, x0: ArrayLike, t: int, sched: NoiseSchedule, rng: np.random.Generator
    ) -> PerturbedProfile:
        eps = rng.standard_normal(np.shape(x0))
        return cls(forward_perturb(x0, t, eps, sched), t, eps)

    def clean(self, sched: NoiseSchedule) -> Array:
        """Invert the perturbation with the stored noise."""
        a = float(_alpha(sched, self.t))
        return (self.x_t - np.sqrt(1.0 - a) * self.eps) / np.sqrt(a)


def trajectory_rng(seed: int, window_key: int, member: int) -> np.random.Generator:
    """Independent substream for one trajectory of one window."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(window_key, member)))


def _denoise_chunk(
    cond: ConditionSet,
    params: DenoiserParams,
    sched: NoiseSchedule,
    seed: int,
    streams: Sequence[tuple[int, int]],
    observed: Array | None,
) -> Array:
    """Denoise one row per (window key, member) stream; `cond` holds the matching rows."""
    steps, tau = sched.steps, params.config.horizon
    eta = 0 if observed is None else observed.shape[-1]
    noise = np.empty((len(streams), steps, tau))
    pins = np.empty((len(streams), steps, eta))
    for row, (window_key, member) in enumerate(streams):
        rng = trajectory_rng(seed, window_key, member)
        noise[row] = rng.standard_normal((steps, tau))
        if eta:
            pins[row] = rng.standard_normal((steps, eta))

    # graph recording is context-local, so every worker thread re-enters no_grad
    with no_grad():
        latent = encode_condition(cond, params)
        x = noise[:, 0]
        if observed is not None:
            x[:, :eta] = forward_perturb(observed, steps, pins[:, 0], sched)
        for t in range(steps, 0, -1):
            row = steps - t + 1
            try:
                eps_hat = predict_noise(x, cond, t, params, cond_latent=latent).data
            except ModelError as exc:
                raise SamplingError(f"denoiser failed at step {t}: {exc}", step=t) from exc
            z = noise[:, row] if t > 1 else np.zeros_like(x)
            x = reverse_step(x, t, eps_hat, z, sched)
            if observed is not None:
                if t > 1:
                    x[:, :eta] = forward_perturb(observed, t - 1, pins[:, row], sched)
                else:
                    x[:, :eta] = observed
            if not np.all(np.isfinite(x)):
                raise SamplingError(f"non-finite sampler state at step {t}", step=t)
    return x


def generate_normalized(
    cond: ConditionSet,
    params: DenoiserParams,
    sched: NoiseSchedule,
    members: int,
    *,
    seed: int = 0,
    window_keys: Sequence[int] | None = None,
    observed: ArrayLike | None = None,
    workers: int = 1,
    chunk_size: int = 250,
) -> Array:
    """Run the reverse process for a batch of conditions, shaped (windows, members, tau).

    Trajectory n of window k always draws from substream (seed, key_k, n). Chunks are
    fixed by `chunk_size`, so the result does not depend on `workers`. `observed` pins a
    normalized prefix, shaped (windows, eta).
    """
    if members < 1:
        raise ConfigurationError("ensemble size must be at least 1")
    if sched.steps != params.config.steps:
        raise ConfigurationError(
            f"schedule has {sched.steps} steps, denoiser was trained with {params.config.steps}"
        )
    batch = cond.batch_shape[0]
    keys = list(range(batch)) if window_keys is None else list(window_keys)
    if len(keys) != batch:
        raise ConfigurationError("one window key per condition row is required")
    obs = None if observed is None else np.asarray(observed, dtype=float).reshape(batch, -1)
    if obs is not None and obs.shape[1] >= params.config.horizon:
        raise ConfigurationError("the observed prefix must be shorter than the horizon")
    if obs is not None and obs.shape[1] == 0:
        obs = None

    total = batch * members
    chunks = [range(start, min(start + chunk_size, total)) for start in range(0, total, chunk_size)]

    def run(chunk: range) -> Array:
        rows = np.array(chunk) // members
        streams = [(keys[r], i % members) for r, i in zip(rows, chunk, strict=True)]
        result = _denoise_chunk(
            cond.take(rows), params, sched, seed, streams, None if obs is None else obs[rows]
        )
        logger.debug(f"Sampled trajectories {chunk.start}..{chunk.stop - 1} of {total}")
        return result

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, chunks))
    else:
        results = [run(c) for c in chunks]
    return np.concatenate(results).reshape(batch, members, params.config.horizon)


def sample_ensembles(
    cond: ConditionSet,
    params: DenoiserParams,
    sched: NoiseSchedule,
    cfg: SamplerConfig,
    stats: NormalizationStats,
    *,
    observed: ArrayLike | None = None,
    window_keys: Sequence[int] | None = None,
) -> list[ForecastEnsemble]:
    """Forecast ensembles in kW for a batch of normalized conditions.

    With `cfg.observed_prefix` > 0, `observed` holds each window's measured load in kW
    (at least that many steps) and every trajectory reproduces it exactly.
    """
    eta = cfg.observed_prefix
    obs_kw = None
    if eta:
        if observed is None:
            raise ConfigurationError(f"observed_prefix={eta} needs the observed load values")
        obs_kw = np.asarray(observed, dtype=float).reshape(cond.batch_shape[0], -1)
        if obs_kw.shape[1] < eta:
            raise ConfigurationError(f"only {obs_kw.shape[1]} observed steps, need {eta}")
        obs_kw = obs_kw[:, :eta]
    normalized = generate_normalized(
        cond,
        params,
        sched,
        cfg.ensemble_size,
        seed=cfg.seed,
        window_keys=window_keys,
        observed=None if obs_kw is None else normalize_load(obs_kw, stats),
        workers=cfg.workers,
        chunk_size=cfg.chunk_size,
    )
    load = np.maximum(denormalize_load(normalized, stats), 0.0)
    if obs_kw is not None:
        load[:, :, :eta] = obs_kw[:, None, :]
    return [ForecastEnsemble.from_trajectories(traj) for traj in load]


def sample_ensemble(
    cond: ConditionSet,
    params: DenoiserParams,
    sched: NoiseSchedule,
    cfg: SamplerConfig,
    stats: NormalizationStats,
    observed: ArrayLike | None = None,
    window_key: int = 0,
) -> ForecastEnsemble:
    """N trajectories for one window, denoised over all T steps and returned in kW."""
    batch = ConditionSet.stack([cond]) if not cond.batch_shape else cond
    if batch.batch_shape != (1,):
        raise ConfigurationError("sample_ensemble takes one condition; use sample_ensembles")
    return sample_ensembles(
        batch,
        params,
        sched,
        cfg,
        stats,
        observed=None if observed is None else np.asarray(observed, dtype=float)[None],
        window_keys=[window_key],
    )[0]


def draw_noise(
    rng: RandomSource, batch: int, tau: int, steps: int
) -> tuple[NDArray[np.int64], Array]:
    """Per-sample diffusion step t ~ U{1..T} and noise eps ~ N(0, I)."""
    if isinstance(rng, np.random.Generator):
        return rng.integers(1, steps + 1, size=batch), rng.standard_normal((batch, tau))
    if len(rng) != batch:
        raise ConfigurationError("one generator per sample is required")
    t = np.array([g.integers(1, steps + 1) for g in rng], dtype=np.int64)
    eps = np.stack([g.standard_normal(tau) for g in rng])
    return t, eps


def epsilon_term(
    x0: Array,
    cond: ConditionSet,
    t: NDArray[np.int64],
    eps: Array,
    params: DenoiserParams,
    sched: NoiseSchedule,
    predictor: Predictor = predict_noise,
) -> Tensor:
    """Batch mean of ||eps - eps_theta(x_t, c, t)||^2."""
    x_t = forward_perturb(x0, t, eps, sched)
    residual = sub(eps, predictor(x_t, cond, t, params))
    return mean(sum_(square(residual), axis=-1))


def epsilon_loss(
    batch: Sequence[ForecastWindow],
    params: DenoiserParams,
    sched: NoiseSchedule,
    rng: RandomSource,
    *,
    predictor: Predictor = predict_noise,
    compute_grad: bool = True,
) -> float:
    """Denoising loss on a batch of normalized windows; gradients land in `params`."""
    if not batch:
        raise DomainError("epsilon_loss needs a non-empty batch")
    x0, cond = collate(batch)
    t, eps = draw_noise(rng, len(batch), x0.shape[-1], sched.steps)
    loss = epsilon_term(x0, cond, t, eps, params, sched, predictor)
    if compute_grad and loss.requires_grad:
        loss.backward()
    return loss.item()


def qdm_loss(
    x0: ArrayLike,
    m0: ArrayLike,
    cond: ConditionSet,
    t: ArrayLike,
    eps: ArrayLike,
    params: DenoiserParams,
    sched: NoiseSchedule,
    *,
    detach_target: bool = True,
    observed_prefix: int = 0,
    predictor: Predictor = predict_noise,
) -> Tensor:
    """Median deviation ||eps_theta(m_t, c, t) - eps_theta(x_t, c, t)||^2.

    m0 and x0 are perturbed with the same t and eps. With `detach_target` the x_t branch
    carries no gradient. A positive `observed_prefix` copies x_t's first steps into m_t.
    """
    x_t = forward_perturb(x0, t, eps, sched)
    m_t = forward_perturb(m0, t, eps, sched)
    if observed_prefix:
        m_t[..., :observed_prefix] = x_t[..., :observed_prefix]
    if detach_target:
        with no_grad():
            target = predictor(x_t, cond, t, params)
    else:
        target = predictor(x_t, cond, t, params)
    deviation = sub(predictor(m_t, cond, t, params), target)
    total = sum_(square(deviation), axis=-1)
    return mean(total) if total.ndim else total


def weighted_refinement(prior: Tensor | float, qdm: Tensor | float, weight: float) -> Tensor:
    """prior + weight * qdm."""
    if weight < 0:
        raise ConfigurationError(f"QDM weight must be non-negative, got {weight}")
    return add(prior, mul(qdm, weight))


def finetune_loss(
    x0: Array,
    m0: Array,
    cond: ConditionSet,
    params: DenoiserParams,
    sched: NoiseSchedule,
    rng: RandomSource,
    *,
    weight: float = 0.001,
    detach_target: bool = True,
    observed_prefix: int = 0,
    predictor: Predictor = predict_noise,
    compute_grad: bool = True,
) -> float:
    """Denoising loss plus `weight` times the QDM loss, sharing one draw of t and eps."""
    t, eps = draw_noise(rng, x0.shape[0], x0.shape[-1], sched.steps)
    prior = epsilon_term(x0, cond, t, eps, params, sched, predictor)
    if weight == 0:
        total = prior
    else:
        qdm = qdm_loss(
            x0,
            m0,
            cond,
            t,
            eps,
            params,
            sched,
            detach_target=detach_target,
            observed_prefix=observed_prefix,
            predictor=predictor,
        )
        total = weighted_refinement(prior, qdm, weight)
    if compute_grad and total.requires_grad:
        total.backward()
    return total.item()
