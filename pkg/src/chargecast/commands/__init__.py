"""Subcommands of the chargecast CLI."""

from __future__ import annotations

import argparse
from pathlib import Path

from ..config import RunConfig
from . import forecast, simulate, train

COMMANDS = [
    simulate.NAME,
    train.TRAIN,
    train.FINETUNE,
    forecast.FORECAST,
    forecast.EVALUATE,
]


def add_all_parsers(subparsers: argparse._SubParsersAction[argparse.ArgumentParser]) -> None:
    """Register every subcommand."""
    simulate.add_parser(subparsers)
    train.add_parsers(subparsers)
    forecast.add_parsers(subparsers)


def command_overrides(args: argparse.Namespace) -> dict[str, object]:
    """Config overrides implied by command-specific flags."""
    return {
        **simulate.overrides(args),
        **train.overrides(args),
        **forecast.overrides(args),
    }


def handle_command(cfg: RunConfig, name: str, args: argparse.Namespace, run_dir: Path) -> Path:
    """Route a subcommand to its handler and return its main output."""
    handlers = [
        simulate.handle_simulate_command,
        train.handle_train_command,
        forecast.handle_forecast_command,
    ]

    for handler in handlers:
        result = handler(cfg, name, args, run_dir)
        if result is not None:
            return result

    raise ValueError(f"Unknown command: {name}")


__all__ = ["COMMANDS", "add_all_parsers", "command_overrides", "handle_command"]
