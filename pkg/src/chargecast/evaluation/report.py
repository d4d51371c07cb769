"""CSV, text and SVG outputs for forecasts and evaluation reports."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from pathlib import Path

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure
from numpy.typing import ArrayLike

from ..errors import ConfigurationError
from .metrics import EvalReport, ForecastEnsemble

logger = logging.getLogger(__name__)

SCORE_COLUMNS = [
    "mae",
    "crps",
    "coverage_90",
    "coverage_50",
    "pi_width_90",
    "pi_width_50",
    "crossing_rate",
]


def report_frame(report: EvalReport) -> pd.DataFrame:
    """Per-sample rows followed by `mean` and `std` footer rows."""
    rows = pd.DataFrame([s.model_dump() for s in report.samples])
    scores = rows[SCORE_COLUMNS].astype(float)
    footer = pd.DataFrame(
        [scores.mean(skipna=True), scores.std(ddof=0, skipna=True)],
        index=["mean", "std"],
    ).reset_index(names="anchor")
    frame = pd.concat([rows, footer], ignore_index=True)
    frame.insert(0, "ev_count_scale", report.ev_count_scale)
    frame.insert(0, "model", report.model)
    frame["cumulative"] = report.cumulative
    return frame


def summary_text(reports: Sequence[EvalReport], effective_config: str) -> str:
    lines = []
    for r in reports:
        unit = "kWh" if r.cumulative else "kW"
        lines.append(f"{r.model} (EV count x{r.ev_count_scale:g}, {len(r.samples)} samples)")
        lines.append(f"  MAE  {r.mae:.4f} +/- {r.mae_std:.4f} {unit}")
        lines.append(f"  CRPS {r.crps:.4f} +/- {r.crps_std:.4f} {unit}")
        lines.append(
            f"  coverage 90% {r.coverage_90:.3f}, 50% {r.coverage_50:.3f}; "
            f"mean 90% width {r.mean_pi_width_90:.4f} {unit}"
        )
        if r.crossing_rate is not None:
            lines.append(f"  quantile crossing rate {r.crossing_rate:.4f}")
    lines.append("")
    lines.append("effective configuration:")
    lines.append(effective_config)
    return "\n".join(lines) + "\n"


def write_report(
    reports: Sequence[EvalReport], out_dir: Path, effective_config: str
) -> tuple[Path, Path]:
    if not reports:
        raise ConfigurationError("nothing to report")
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "report.csv"
    frame = pd.concat([report_frame(r) for r in reports], ignore_index=True)
    frame.to_csv(csv_path, index=False, float_format="%.6f", lineterminator="\n")
    text_path = out_dir / "summary.txt"
    text_path.write_text(summary_text(reports, effective_config), encoding="utf-8")
    logger.info(f"Wrote evaluation report {csv_path}")
    return csv_path, text_path


def write_ensemble_csv(
    path: Path, ensembles: Sequence[ForecastEnsemble], anchors: Sequence[str]
) -> Path:
    """One row per trajectory: anchor, member, then the tau load values in kW."""
    frames = []
    for anchor, ensemble in zip(anchors, ensembles, strict=True):
        frame = pd.DataFrame(
            ensemble.trajectories, columns=[f"step_{i}" for i in range(ensemble.horizon)]
        )
        frame.insert(0, "member", np.arange(ensemble.size))
        frame.insert(0, "anchor", anchor)
        frames.append(frame)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.concat(frames, ignore_index=True).to_csv(
        path, index=False, float_format="%.6f", lineterminator="\n"
    )
    logger.info(f"Wrote {len(frames)} ensembles to {path}")
    return path


def plot_bands(
    path: Path,
    ensemble: ForecastEnsemble,
    *,
    truth: ArrayLike | None = None,
    title: str = "",
    resolution_min: int = 15,
    unit: str = "kW",
) -> Path:
    """SVG of the 50% and 90% bands, the median and (optionally) the truth."""
    hours = np.arange(ensemble.horizon) * resolution_min / 60.0
    fig = Figure(figsize=(8, 3.5), constrained_layout=True)
    ax = fig.add_subplot()
    low90, high90 = ensemble.interval(0.9)
    low50, high50 = ensemble.interval(0.5)
    ax.fill_between(hours, low90, high90, color="tab:blue", alpha=0.2, label="90% PI")
    ax.fill_between(hours, low50, high50, color="tab:blue", alpha=0.4, label="50% PI")
    ax.plot(hours, ensemble.median, color="tab:blue", linewidth=1.5, label="median")
    if truth is not None:
        ax.plot(hours, np.asarray(truth, dtype=float), color="black", linewidth=1.2, label="truth")
    ax.set_xlabel("hours ahead")
    ax.set_ylabel(unit)
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="upper left", fontsize=8)
    path.parent.mkdir(parents=True, exist_ok=True)
    # fixed element ids and no timestamp keep the SVG byte-stable
    with matplotlib.rc_context({"svg.hashsalt": "chargecast", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.info(f"Wrote band plot {path}")
    return path
