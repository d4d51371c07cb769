"""Point and probabilistic scores for forecast ensembles and quantile tracks.

All scores are in physical units (kW, or kWh for the cumulative view).
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import DataError, DomainError

Array = NDArray[np.float64]

LEVELS: tuple[float, ...] = (0.05, 0.25, 0.5, 0.75, 0.95)


def quantile(values: ArrayLike, q: float) -> float:
    """Order statistic with linear interpolation between adjacent ranks."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise DomainError("quantile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"quantile level must lie in [0, 1], got {q}")
    return float(np.quantile(arr, q, method="linear"))


@dataclass(frozen=True, eq=False)
class ForecastEnsemble:
    """N trajectories over tau steps with their per-step quantile tracks."""

    trajectories: Array
    quantiles: Array
    levels: tuple[float, ...] = LEVELS

    @classmethod
    def from_trajectories(
        cls, trajectories: ArrayLike, levels: Sequence[float] = LEVELS
    ) -> ForecastEnsemble:
        traj = np.asarray(trajectories, dtype=float)
        if traj.ndim != 2 or traj.shape[0] == 0:
            raise DomainError(f"ensemble must be shaped (members, steps), got {traj.shape}")
        levels = tuple(float(q) for q in levels)
        if 0.5 not in levels or list(levels) != sorted(levels):
            raise DomainError("quantile levels must be increasing and include the median")
        return cls(traj, np.quantile(traj, levels, axis=0, method="linear"), levels)

    @property
    def size(self) -> int:
        return int(self.trajectories.shape[0])

    @property
    def horizon(self) -> int:
        return int(self.trajectories.shape[1])

    @property
    def median(self) -> Array:
        return self.quantiles[self.levels.index(0.5)]

    def track(self, level: float) -> Array:
        return self.quantiles[self.levels.index(level)]

    def interval(self, level: float) -> tuple[Array, Array]:
        """Central prediction interval, e.g. 0.9 -> (5% track, 95% track)."""
        low, high = round((1.0 - level) / 2.0, 10), round((1.0 + level) / 2.0, 10)
        if low not in self.levels or high not in self.levels:
            raise DomainError(f"no {level:.0%} interval among levels {self.levels}")
        return self.track(low), self.track(high)


def _check_pair(pred: Array, truth: Array) -> None:
    if pred.shape != truth.shape:
        raise DataError(f"forecast length {pred.shape} does not match truth {truth.shape}")


def mae(median: ArrayLike, truth: ArrayLike) -> float:
    m, y = np.asarray(median, dtype=float), np.asarray(truth, dtype=float)
    _check_pair(m, y)
    return float(np.mean(np.abs(m - y)))


def crps(members: ArrayLike, y: float) -> float:
    """Empirical CRPS, mean|X - y| - 1/(2 N^2) sum_ij |X_i - X_j|.

    The pairwise sum is evaluated in O(N log N) from the sorted members.
    """
    x = np.sort(np.asarray(members, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise DomainError("CRPS of an empty ensemble")
    spread = np.dot(2.0 * np.arange(n) - n + 1.0, x) / (n * n)
    return float(np.mean(np.abs(x - y)) - spread)


def crps_profile(trajectories: ArrayLike, truth: ArrayLike) -> float:
    """Per-step CRPS averaged over the horizon."""
    traj = np.asarray(trajectories, dtype=float)
    y = np.asarray(truth, dtype=float)
    if traj.ndim != 2 or traj.shape[0] == 0:
        raise DomainError("CRPS needs a non-empty (members, steps) ensemble")
    _check_pair(traj[0], y)
    n = traj.shape[0]
    ordered = np.sort(traj, axis=0)
    weights = (2.0 * np.arange(n) - n + 1.0) / (n * n)
    spread = weights @ ordered
    return float(np.mean(np.mean(np.abs(traj - y), axis=0) - spread))


def coverage_and_width(
    ensemble: ForecastEnsemble, truth: ArrayLike, level: float
) -> tuple[float, float]:
    """Fraction of steps inside the central interval and its mean width."""
    y = np.asarray(truth, dtype=float)
    low, high = ensemble.interval(level)
    _check_pair(low, y)
    inside = (low <= y) & (y <= high)
    return float(inside.mean()), float(np.mean(high - low))


def pinball_loss(pred: ArrayLike, truth: ArrayLike, q: float) -> Array | float:
    if not 0.0 < q < 1.0:
        raise DomainError(f"pinball level must lie in (0, 1), got {q}")
    diff = np.asarray(truth, dtype=float) - np.asarray(pred, dtype=float)
    loss = np.where(diff >= 0, q * diff, (q - 1.0) * diff)
    return float(loss) if loss.ndim == 0 else loss


def quantile_crps(tracks: ArrayLike, truth: ArrayLike, levels: Sequence[float] = LEVELS) -> float:
    """CRPS approximated from a discrete set of quantile tracks.

    Twice the pinball loss averaged over the levels, then over the horizon.
    """
    q_tracks = np.asarray(tracks, dtype=float)
    y = np.asarray(truth, dtype=float)
    if q_tracks.shape != (len(levels), y.shape[-1]):
        raise DataError(f"expected {len(levels)} tracks of length {y.shape[-1]}")
    losses = [pinball_loss(track, y, q) for track, q in zip(q_tracks, levels, strict=True)]
    return float(2.0 * np.mean(losses))


def crossing_rate(tracks: ArrayLike) -> float:
    """Share of (step, adjacent level pair) where a lower level exceeds the next one."""
    q_tracks = np.asarray(tracks, dtype=float)
    if q_tracks.shape[0] < 2:
        return 0.0
    return float(np.mean(q_tracks[:-1] > q_tracks[1:]))


def cumulative_energy(profile: ArrayLike, resolution_min: int) -> Array:
    """Running energy in kWh of a kW profile (last axis is time)."""
    return np.cumsum(np.asarray(profile, dtype=float), axis=-1) * (resolution_min / 60.0)


class SampleScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    anchor: str
    mae: float
    crps: float
    coverage_90: float = Field(ge=0.0, le=1.0)
    coverage_50: float = Field(ge=0.0, le=1.0)
    pi_width_90: float
    pi_width_50: float
    crossing_rate: float | None = None


class EvalReport(BaseModel):
    """Scores of one forecaster on the test split, with mean and std across samples."""

    model_config = ConfigDict(frozen=True)

    model: str
    ev_count_scale: float = 1.0
    cumulative: bool = False
    samples: list[SampleScore]
    mae: float
    mae_std: float
    crps: float
    crps_std: float
    coverage_90: float = Field(ge=0.0, le=1.0)
    coverage_50: float = Field(ge=0.0, le=1.0)
    mean_pi_width_90: float
    mean_pi_width_50: float
    crossing_rate: float | None = None

    @model_validator(mode="after")
    def _finite(self) -> EvalReport:
        for name in ("mae", "mae_std", "crps", "crps_std", "mean_pi_width_90", "mean_pi_width_50"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} is not finite")
        return self

    @classmethod
    def from_samples(
        cls,
        model: str,
        samples: Sequence[SampleScore],
        *,
        ev_count_scale: float = 1.0,
        cumulative: bool = False,
    ) -> EvalReport:
        if not samples:
            raise DomainError(f"no test samples to score for {model}")

        def column(name: str) -> Array:
            return np.array([getattr(s, name) for s in samples], dtype=float)

        crossings = [s.crossing_rate for s in samples if s.crossing_rate is not None]
        return cls(
            model=model,
            ev_count_scale=ev_count_scale,
            cumulative=cumulative,
            samples=list(samples),
            mae=float(column("mae").mean()),
            mae_std=float(column("mae").std()),
            crps=float(column("crps").mean()),
            crps_std=float(column("crps").std()),
            coverage_90=float(column("coverage_90").mean()),
            coverage_50=float(column("coverage_50").mean()),
            mean_pi_width_90=float(column("pi_width_90").mean()),
            mean_pi_width_50=float(column("pi_width_50").mean()),
            crossing_rate=float(np.mean(crossings)) if crossings else None,
        )


def score_ensemble(anchor: str, ensemble: ForecastEnsemble, truth: ArrayLike) -> SampleScore:
    y = np.asarray(truth, dtype=float)
    cov90, width90 = coverage_and_width(ensemble, y, 0.9)
    cov50, width50 = coverage_and_width(ensemble, y, 0.5)
    return SampleScore(
        anchor=anchor,
        mae=mae(ensemble.median, y),
        crps=crps_profile(ensemble.trajectories, y),
        coverage_90=cov90,
        coverage_50=cov50,
        pi_width_90=width90,
        pi_width_50=width50,
    )


def evaluate_ensembles(
    model: str,
    ensembles: Sequence[ForecastEnsemble],
    truths: Sequence[ArrayLike],
    anchors: Sequence[str],
    *,
    ev_count_scale: float = 1.0,
    cumulative: bool = False,
    resolution_min: int = 15,
) -> EvalReport:
    """Score one ensemble per test window; `cumulative` scores running energy instead of load."""
    if not len(ensembles) == len(truths) == len(anchors):
        raise DataError("ensembles, truths and anchors must align one to one")
    samples = []
    for anchor, ensemble, truth in zip(anchors, ensembles, truths, strict=True):
        y = np.asarray(truth, dtype=float)
        if cumulative:
            ensemble = ForecastEnsemble.from_trajectories(
                cumulative_energy(ensemble.trajectories, resolution_min), ensemble.levels
            )
            y = cumulative_energy(y, resolution_min)
        samples.append(score_ensemble(anchor, ensemble, y))
    return EvalReport.from_samples(
        model, samples, ev_count_scale=ev_count_scale, cumulative=cumulative
    )


def evaluate_quantile_tracks(
    model: str,
    tracks: Sequence[ArrayLike],
    truths: Sequence[ArrayLike],
    anchors: Sequence[str],
    *,
    levels: Sequence[float] = LEVELS,
    ev_count_scale: float = 1.0,
    cumulative: bool = False,
    resolution_min: int = 15,
) -> EvalReport:
    """Score quantile tracks as they come out of the model; crossings are counted, not fixed.

    In the cumulative view each track is integrated on its own.
    """
    if not len(tracks) == len(truths) == len(anchors):
        raise DataError("tracks, truths and anchors must align one to one")
    levels = tuple(levels)
    lo90, hi90 = levels.index(0.05), levels.index(0.95)
    lo50, hi50 = levels.index(0.25), levels.index(0.75)
    samples = []
    for anchor, raw, truth in zip(anchors, tracks, truths, strict=True):
        q = np.asarray(raw, dtype=float)
        y = np.asarray(truth, dtype=float)
        if cumulative:
            q, y = cumulative_energy(q, resolution_min), cumulative_energy(y, resolution_min)
        samples.append(
            SampleScore(
                anchor=anchor,
                mae=mae(q[levels.index(0.5)], y),
                crps=quantile_crps(q, y, levels),
                coverage_90=float(np.mean((q[lo90] <= y) & (y <= q[hi90]))),
                coverage_50=float(np.mean((q[lo50] <= y) & (y <= q[hi50]))),
                pi_width_90=float(np.mean(q[hi90] - q[lo90])),
                pi_width_50=float(np.mean(q[hi50] - q[lo50])),
                crossing_rate=crossing_rate(q),
            )
        )
    return EvalReport.from_samples(
        model, samples, ev_count_scale=ev_count_scale, cumulative=cumulative
    )
