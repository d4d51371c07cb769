"""`train` and `finetune`: Stage 1 and Stage 2 of the training pipeline."""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path

from ..artifact import build_manifest, save_artifact
from ..config import RunConfig
from ..data import fit_stats, normalize
from ..errors import ConfigurationError
from ..model import DenoiserConfig, DenoiserParams
from ..schedule import build_quadratic_schedule
from ..training import finetune, pretrain, write_loss_csv
from .common import ARTIFACT_NAME, load_dataset, open_artifact, split

logger = logging.getLogger(__name__)

TRAIN = "train"
FINETUNE = "finetune"


def add_parsers(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(TRAIN, help="Pretrain a denoiser on the training split")
    parser.add_argument("--epochs", type=int, help="Pretraining epochs (training.pretrain_epochs)")

    parser = subparsers.add_parser(
        FINETUNE, help="Refine a pretrained artifact with the median-deviation loss"
    )
    parser.add_argument("--artifact", type=Path, required=True, help="Pretrained model.zip")
    parser.add_argument("--epochs", type=int, help="Fine-tuning epochs (training.finetune_epochs)")


def overrides(args: argparse.Namespace) -> dict[str, object]:
    epochs = getattr(args, "epochs", None)
    if epochs is None:
        return {}
    key = "training.pretrain_epochs" if args.command == TRAIN else "training.finetune_epochs"
    return {key: epochs}


def train(cfg: RunConfig, run_dir: Path) -> Path:
    dataset = load_dataset(cfg)
    train_windows, _ = split(cfg, dataset.windows)
    stats = fit_stats(train_windows)
    normalized = [normalize(w, stats) for w in train_windows]
    sched = build_quadratic_schedule(
        cfg.schedule.steps, cfg.schedule.beta_start, cfg.schedule.beta_end
    )
    params = DenoiserParams(DenoiserConfig.from_run_config(cfg), seed=cfg.model.seed)
    curve = pretrain(normalized, params, sched, cfg.training)
    write_loss_csv(curve, run_dir / "loss.csv")
    manifest = build_manifest(
        params,
        stage="pretrained",
        schedule=cfg.schedule,
        window=cfg.window,
        stats=stats,
        run_config=json.loads(cfg.effective_json()),
    )
    return save_artifact(run_dir / ARTIFACT_NAME, params, manifest)


def refine(cfg: RunConfig, artifact: Path, run_dir: Path) -> Path:
    """Fine-tune a pretrained artifact; the input file is never modified."""
    params, manifest = open_artifact(artifact, cfg)
    if manifest.stage != "pretrained":
        raise ConfigurationError(
            f"{artifact} is already {manifest.stage}; finetune needs a pretrained artifact"
        )
    if run_dir.resolve() == artifact.parent.resolve():
        raise ConfigurationError("write the fine-tuned artifact to a new run directory")
    dataset = load_dataset(cfg)
    train_windows, _ = split(cfg, dataset.windows)
    normalized = [normalize(w, manifest.stats) for w in train_windows]
    curve = finetune(
        normalized,
        params,
        manifest.noise_schedule(),
        cfg.training,
        observed_prefix=cfg.sampler.observed_prefix,
        workers=cfg.sampler.workers,
        chunk_size=cfg.sampler.chunk_size,
    )
    write_loss_csv(curve, run_dir / "loss.csv")
    refined = build_manifest(
        params,
        stage="finetuned",
        schedule=manifest.schedule,
        window=manifest.window,
        stats=manifest.stats,
        run_config=json.loads(cfg.effective_json()),
    )
    return save_artifact(run_dir / ARTIFACT_NAME, params, refined)


def handle_train_command(
    cfg: RunConfig, name: str, args: argparse.Namespace, run_dir: Path
) -> Path | None:
    if name == TRAIN:
        return train(cfg, run_dir)
    if name == FINETUNE:
        return refine(cfg, args.artifact, run_dir)
    return None
