"""`forecast` and `evaluate`: sample ensembles for the test split and score them."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

import numpy as np

from ..artifact import ArtifactManifest
from ..config import RunConfig
from ..data import ForecastWindow, fit_stats, normalize
from ..data.windows import scale_ev_count
from ..errors import DataError
from ..evaluation import (
    EvalReport,
    ForecastEnsemble,
    climatology_forecast,
    evaluate_ensembles,
    evaluate_quantile_tracks,
    plot_bands,
    train_quantile_baseline,
    write_ensemble_csv,
    write_report,
)
from ..evaluation.metrics import cumulative_energy
from ..model import DenoiserConfig, DenoiserParams
from ..training import forecast_windows
from .common import load_dataset, open_artifact, split, write_json

logger = logging.getLogger(__name__)

FORECAST = "forecast"
EVALUATE = "evaluate"


def add_parsers(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(FORECAST, help="Sample forecast ensembles for the test split")
    parser.add_argument("--artifact", type=Path, required=True, help="Trained model.zip")
    parser.add_argument(
        "--horizon-observed",
        type=int,
        dest="horizon_observed",
        help="Pin the first ETA steps of every trajectory to the measured load "
        "(sampler.observed_prefix)",
    )
    parser.add_argument("--ensemble-size", type=int, help="Trajectories per window")
    parser.add_argument(
        "--ev-count-scale", type=float, default=1.0, help="Scale the EV count covariate"
    )

    parser = subparsers.add_parser(
        EVALUATE, help="Score artifacts and baselines on the test split"
    )
    parser.add_argument(
        "--artifact",
        type=Path,
        action="append",
        default=[],
        help="Trained model.zip (repeat to compare several)",
    )
    parser.add_argument("--ensemble-size", type=int, help="Trajectories per window")
    parser.add_argument(
        "--ev-count-scale",
        type=float,
        nargs="+",
        help="EV count multipliers to sweep (evaluation.ev_count_scales)",
    )
    parser.add_argument(
        "--cumulative", action="store_true", help="Score cumulative energy instead of load"
    )
    parser.add_argument(
        "--no-baselines",
        action="store_true",
        help="Skip the quantile-regression and climatology baselines",
    )


def overrides(args: argparse.Namespace) -> dict[str, object]:
    found: dict[str, object] = {}
    if getattr(args, "horizon_observed", None) is not None:
        found["sampler.observed_prefix"] = args.horizon_observed
    if getattr(args, "ensemble_size", None) is not None:
        found["sampler.ensemble_size"] = args.ensemble_size
    if args.command == EVALUATE:
        if args.ev_count_scale:
            found["evaluation.ev_count_scales"] = list(args.ev_count_scale)
        if args.cumulative:
            found["evaluation.cumulative"] = True
        if args.no_baselines:
            found["evaluation.quantile_baseline"] = False
            found["evaluation.climatology"] = False
    return found


def _label(path: Path, manifest: ArtifactManifest) -> str:
    return f"{path.parent.name}:{manifest.stage}"


def _test_windows(cfg: RunConfig) -> tuple[list[ForecastWindow], list[ForecastWindow]]:
    train, test = split(cfg, load_dataset(cfg).windows)
    if not test:
        raise DataError("no test windows after the split; move data.test_start earlier")
    return train, test


def _anchor(window: ForecastWindow) -> str:
    return window.anchor.strftime("%Y-%m-%dT%H:%M")


def _plot(
    run_dir: Path,
    label: str,
    windows: list[ForecastWindow],
    ensembles: list[ForecastEnsemble],
    cfg: RunConfig,
    *,
    cumulative: bool = False,
) -> None:
    resolution = cfg.window.resolution_min
    for window, ensemble in list(zip(windows, ensembles, strict=True))[
        : cfg.evaluation.plot_windows
    ]:
        truth = window.target
        unit = "kW"
        if cumulative:
            ensemble = ForecastEnsemble.from_trajectories(
                cumulative_energy(ensemble.trajectories, resolution)
            )
            truth = cumulative_energy(truth, resolution)
            unit = "kWh"
        safe = label.replace(":", "-").replace("/", "-")
        plot_bands(
            run_dir / f"bands_{safe}_{window.anchor.strftime('%Y%m%d')}.svg",
            ensemble,
            truth=truth,
            title=f"{label} {_anchor(window)}",
            resolution_min=resolution,
            unit=unit,
        )


def forecast(cfg: RunConfig, artifact: Path, ev_count_scale: float, run_dir: Path) -> Path:
    params, manifest = open_artifact(artifact, cfg)
    _, test = _test_windows(cfg)
    ensembles = forecast_windows(
        test,
        params,
        manifest.noise_schedule(),
        cfg.sampler,
        manifest.stats,
        ev_count_scale=ev_count_scale,
    )
    anchors = [_anchor(w) for w in test]
    path = write_ensemble_csv(run_dir / "ensembles.csv", ensembles, anchors)
    _plot(run_dir, _label(artifact, manifest), test, ensembles, cfg)
    write_json(
        run_dir / "forecast.json",
        {
            "artifact": str(artifact),
            "stage": manifest.stage,
            "windows": anchors,
            "ensemble_size": cfg.sampler.ensemble_size,
            "observed_prefix": cfg.sampler.observed_prefix,
            "ev_count_scale": ev_count_scale,
        },
    )
    return path


def _baseline_reports(
    cfg: RunConfig, train: list[ForecastWindow], test: list[ForecastWindow]
) -> list[EvalReport]:
    ev = cfg.evaluation
    resolution = cfg.window.resolution_min
    truths = [w.target for w in test]
    anchors = [_anchor(w) for w in test]
    reports = []
    if ev.climatology:
        clim = ForecastEnsemble.from_trajectories(climatology_forecast(train)[None, :])
        reports.append(
            evaluate_ensembles(
                "climatology",
                [clim] * len(test),
                truths,
                anchors,
                cumulative=ev.cumulative,
                resolution_min=resolution,
            )
        )
    if ev.quantile_baseline:
        stats = fit_stats(train)
        model, _ = train_quantile_baseline(
            [normalize(w, stats) for w in train],
            DenoiserConfig.from_run_config(cfg),
            epochs=ev.baseline_epochs,
            learning_rate=ev.baseline_lr,
            batch_size=cfg.training.batch_size,
            seed=cfg.training.seed,
        )
        for scale in ev.ev_count_scales:
            tracks = model.predict([scale_ev_count(w, scale) for w in test], stats)
            reports.append(
                evaluate_quantile_tracks(
                    "quantile_regression",
                    tracks,
                    truths,
                    anchors,
                    ev_count_scale=scale,
                    cumulative=ev.cumulative,
                    resolution_min=resolution,
                )
            )
    return reports


def evaluate(cfg: RunConfig, artifacts: list[Path], run_dir: Path) -> Path:
    ev = cfg.evaluation
    train, test = _test_windows(cfg)
    truths = [w.target for w in test]
    anchors = [_anchor(w) for w in test]
    reports: list[EvalReport] = []
    loaded: list[tuple[str, DenoiserParams, ArtifactManifest]] = []
    for path in artifacts:
        params, manifest = open_artifact(path, cfg)
        label = _label(path, manifest)
        if any(label == seen for seen, _, _ in loaded):
            label = f"{label}#{len(loaded)}"
        loaded.append((label, params, manifest))

    for label, params, manifest in loaded:
        for i, scale in enumerate(ev.ev_count_scales):
            ensembles = forecast_windows(
                test,
                params,
                manifest.noise_schedule(),
                cfg.sampler,
                manifest.stats,
                ev_count_scale=scale,
            )
            reports.append(
                evaluate_ensembles(
                    label,
                    ensembles,
                    truths,
                    anchors,
                    ev_count_scale=scale,
                    cumulative=ev.cumulative,
                    resolution_min=cfg.window.resolution_min,
                )
            )
            if i == 0:
                _plot(run_dir, label, test, ensembles, cfg, cumulative=ev.cumulative)
            mean_energy = np.mean(
                [cumulative_energy(e.median, cfg.window.resolution_min)[-1] for e in ensembles]
            )
            logger.info(f"{label} EV x{scale:g}: mean median daily energy {mean_energy:.2f} kWh")

    reports += _baseline_reports(cfg, train, test)
    csv_path, _ = write_report(reports, run_dir, cfg.effective_json())
    return csv_path


def handle_forecast_command(
    cfg: RunConfig, name: str, args: argparse.Namespace, run_dir: Path
) -> Path | None:
    if name == FORECAST:
        return forecast(cfg, args.artifact, args.ev_count_scale, run_dir)
    if name == EVALUATE:
        return evaluate(cfg, list(args.artifact), run_dir)
    return None
