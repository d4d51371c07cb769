"""`simulate`: write a synthetic charging corpus."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

from ..config import RunConfig
from ..data import generate_synthetic, write_sessions_csv, write_weather_csv
from .common import write_json

logger = logging.getLogger(__name__)

NAME = "simulate"


def add_parser(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    parser = subparsers.add_parser(
        NAME, help="Generate synthetic sessions and weather with a known generative process"
    )
    parser.add_argument("--days", type=int, help="Number of days (synthetic.days)")
    parser.add_argument("--seed", type=int, help="Generator seed (synthetic.seed)")


def overrides(args: argparse.Namespace) -> dict[str, object]:
    found: dict[str, object] = {}
    if getattr(args, "days", None) is not None:
        found["synthetic.days"] = args.days
    if getattr(args, "seed", None) is not None:
        found["synthetic.seed"] = args.seed
    return found


def simulate(cfg: RunConfig, out_dir: Path) -> Path:
    """Write sessions.csv, weather.csv, days.csv and manifest.json into `out_dir`."""
    corpus = generate_synthetic(cfg.synthetic)
    sessions_path = out_dir / "sessions.csv"
    weather_path = out_dir / "weather.csv"
    write_sessions_csv(corpus.sessions, sessions_path)
    write_weather_csv(corpus.weather, weather_path)
    days = corpus.days.copy()
    days.index = days.index.strftime("%Y-%m-%d")
    days.to_csv(out_dir / "days.csv", float_format="%.6f", lineterminator="\n")
    manifest = write_json(
        out_dir / "manifest.json",
        {
            "generator": "chargecast.synthetic",
            "seed": cfg.synthetic.seed,
            "days": cfg.synthetic.days,
            "start": cfg.synthetic.start.isoformat(),
            "session_rows": len(corpus.sessions),
            "weather_rows": len(corpus.weather),
            "files": ["sessions.csv", "weather.csv", "days.csv"],
            "synthetic": cfg.synthetic.model_dump(mode="json"),
        },
    )
    logger.info(
        f"Wrote {len(corpus.sessions)} sessions and {len(corpus.weather)} weather rows to {out_dir}"
    )
    return manifest


def handle_simulate_command(
    cfg: RunConfig, name: str, args: argparse.Namespace, run_dir: Path
) -> Path | None:
    if name != NAME:
        return None
    return simulate(cfg, run_dir)
