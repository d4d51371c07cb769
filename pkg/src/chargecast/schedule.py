"""Quadratic diffusion noise schedule.

Diffusion steps are indexed 1..T in every public function; t=0 denotes clean data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import ConfigurationError, DomainError

Array = NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class NoiseSchedule:
    """beta_t, alpha_t = prod_{s<=t}(1 - beta_s) and posterior variances, stored 0-based."""

    steps: int
    beta_start: float
    beta_end: float
    beta: Array
    alpha_bar: Array
    beta_tilde: Array

    def _check(self, t: ArrayLike, *, allow_zero: bool = False) -> NDArray[np.int64]:
        idx = np.asarray(t, dtype=np.int64)
        low = 0 if allow_zero else 1
        if np.any(idx < low) or np.any(idx > self.steps):
            raise DomainError(f"diffusion step out of range [{low}, {self.steps}]: {t}")
        return idx

    def beta_at(self, t: ArrayLike) -> Array:
        return self.beta[self._check(t) - 1]

    def alpha_bar_at(self, t: ArrayLike) -> Array:
        """alpha_t, with alpha_0 = 1."""
        idx = self._check(t, allow_zero=True)
        padded = np.concatenate([[1.0], self.alpha_bar])
        return padded[idx]

    def beta_tilde_at(self, t: ArrayLike) -> Array:
        return self.beta_tilde[self._check(t) - 1]


def schedule_from_betas(betas: ArrayLike) -> NoiseSchedule:
    """Derive the alpha and posterior-variance tables from an explicit beta sequence."""
    beta = np.array(betas, dtype=np.float64)
    if beta.ndim != 1 or beta.size < 2:
        raise ConfigurationError("schedule needs a 1-D beta table with at least 2 steps")
    if not np.all((beta > 0.0) & (beta < 1.0)):
        raise ConfigurationError("every beta must lie in (0, 1)")

    alpha_bar = np.cumprod(1.0 - beta)
    alpha_prev = np.concatenate([[1.0], alpha_bar[:-1]])
    beta_tilde = (1.0 - alpha_prev) / (1.0 - alpha_bar) * beta

    for table in (beta, alpha_bar, beta_tilde):
        table.setflags(write=False)
    return NoiseSchedule(
        int(beta.size), float(beta[0]), float(beta[-1]), beta, alpha_bar, beta_tilde
    )


def build_quadratic_schedule(steps: int, beta_start: float, beta_end: float) -> NoiseSchedule:
    """Interpolate linearly in sqrt(beta) space so both endpoints are hit exactly."""
    if steps < 2:
        raise ConfigurationError(f"schedule needs at least 2 steps, got {steps}")
    if not 0.0 < beta_start < beta_end < 1.0:
        raise ConfigurationError(
            f"schedule requires 0 < beta_start < beta_end < 1, got {beta_start}, {beta_end}"
        )
    fraction = np.arange(steps, dtype=np.float64) / (steps - 1)
    root = np.sqrt(beta_start) + fraction * (np.sqrt(beta_end) - np.sqrt(beta_start))
    beta = root**2
    beta[0] = beta_start
    beta[-1] = beta_end
    return schedule_from_betas(beta)


def posterior_variance(sched: NoiseSchedule, t: int) -> float:
    """beta_tilde_t = (1 - alpha_{t-1}) / (1 - alpha_t) * beta_t; zero at t=1."""
    return float(sched.beta_tilde_at(t))
