"""chargecast command-line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from .commands import add_all_parsers, command_overrides, handle_command
from .commands.common import make_run_dir
from .config import load_config
from .errors import ChargecastError

logger = logging.getLogger(__name__)


def parse_assignment(text: str) -> tuple[str, Any]:
    """`section.key=value`; the value is read as JSON when possible, else as a string."""
    key, sep, raw = text.partition("=")
    if not sep or not key:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chargecast", description="Probabilistic EV charging load forecasting"
    )
    parser.add_argument("--config", type=Path, help="TOML run configuration")
    parser.add_argument(
        "--set",
        dest="assignments",
        type=parse_assignment,
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a config key, e.g. --set training.batch_size=32 (repeatable)",
    )
    parser.add_argument(
        "--run-dir",
        type=Path,
        help="Output directory (default: <run_root>/<time>-seed<seed>-<cmd>)",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    subparsers = parser.add_subparsers(dest="command", required=True)
    add_all_parsers(subparsers)
    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Execute one command and return its exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        overrides = dict(args.assignments)
        overrides.update(command_overrides(args))
        cfg = load_config(args.config, overrides)
        run_dir = make_run_dir(cfg, args.command, args.run_dir)
        output = handle_command(cfg, args.command, args, run_dir)
    except ValidationError as exc:
        logger.error(f"Invalid configuration:\n{exc}")
        return 1
    except ChargecastError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        return exc.exit_code
    except OSError as exc:
        logger.error(f"I/O failure: {exc}")
        return 1

    logger.info(f"{args.command} finished: {output}")
    return 0


def main() -> None:
    """Entry point for the chargecast command."""
    sys.exit(run())


if __name__ == "__main__":
    main()
