"""Model artifacts: a zip of `.npy` parameter members plus `manifest.json`.

Member timestamps and ordering are fixed, so the same parameters and manifest always give
byte-identical files.
"""

from __future__ import annotations

import io
import json
import logging
import zipfile
from pathlib import Path
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError

from .config import ScheduleConfig, WindowConfig
from .data.windows import NormalizationStats
from .errors import ArtifactError, ConfigurationError
from .model import DenoiserConfig, DenoiserParams
from .schedule import NoiseSchedule, build_quadratic_schedule

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
_EPOCH = (1980, 1, 1, 0, 0, 0)

Stage = Literal["pretrained", "finetuned"]


class ArtifactManifest(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    format_version: int = FORMAT_VERSION
    stage: Stage
    denoiser: dict[str, Any]
    schedule: ScheduleConfig
    window: WindowConfig
    stats: NormalizationStats
    shapes: dict[str, list[int]]
    run_config: dict[str, Any] = {}

    def denoiser_config(self) -> DenoiserConfig:
        try:
            return DenoiserConfig(**self.denoiser)
        except TypeError as exc:
            raise ArtifactError(f"artifact denoiser config is malformed: {exc}") from exc

    def noise_schedule(self) -> NoiseSchedule:
        return build_quadratic_schedule(
            self.schedule.steps, self.schedule.beta_start, self.schedule.beta_end
        )


def build_manifest(
    params: DenoiserParams,
    *,
    stage: Stage,
    schedule: ScheduleConfig,
    window: WindowConfig,
    stats: NormalizationStats,
    run_config: dict[str, Any] | None = None,
) -> ArtifactManifest:
    if params.config.steps != schedule.steps:
        raise ConfigurationError(
            f"denoiser was built for {params.config.steps} steps, schedule has {schedule.steps}"
        )
    if (params.config.horizon, params.config.history) != (window.horizon, window.history):
        raise ConfigurationError("denoiser and window config disagree on horizon/history")
    return ArtifactManifest(
        stage=stage,
        denoiser=params.config.to_dict(),
        schedule=schedule,
        window=window,
        stats=stats,
        shapes={name: list(p.data.shape) for name, p in params.parameters().items()},
        run_config=run_config or {},
    )


def _member(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    return info


def save_artifact(path: Path | str, params: DenoiserParams, manifest: ArtifactManifest) -> Path:
    path = Path(path)
    state = params.state_dict()
    if {k: list(v.shape) for k, v in state.items()} != manifest.shapes:
        raise ConfigurationError("manifest shape table does not match the parameters")
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        with zipfile.ZipFile(path, "w") as archive:
            body = json.dumps(manifest.model_dump(mode="json"), indent=2, sort_keys=True)
            archive.writestr(_member(MANIFEST), body + "\n")
            for name in sorted(state):
                buffer = io.BytesIO()
                np.lib.format.write_array(buffer, state[name], allow_pickle=False)
                archive.writestr(_member(f"params/{name}.npy"), buffer.getvalue())
    except OSError as exc:
        raise ArtifactError(f"cannot write artifact {path}: {exc}") from exc
    logger.info(f"Wrote {manifest.stage} artifact {path} ({len(state)} tensors)")
    return path


def load_artifact(path: Path | str) -> tuple[DenoiserParams, ArtifactManifest]:
    path = Path(path)
    if not path.is_file():
        raise ArtifactError(f"artifact not found: {path}")
    try:
        with zipfile.ZipFile(path) as archive:
            raw = json.loads(archive.read(MANIFEST))
            version = raw.get("format_version")
            if version != FORMAT_VERSION:
                raise ArtifactError(
                    f"{path}: unsupported artifact format {version}, expected {FORMAT_VERSION}"
                )
            manifest = ArtifactManifest.model_validate(raw)
            state = {}
            for name, shape in manifest.shapes.items():
                with archive.open(f"params/{name}.npy") as member:
                    array = np.lib.format.read_array(
                        io.BytesIO(member.read()), allow_pickle=False
                    )
                if list(array.shape) != shape:
                    raise ArtifactError(
                        f"{path}: {name} has shape {list(array.shape)}, manifest says {shape}"
                    )
                if not np.all(np.isfinite(array)):
                    raise ArtifactError(f"{path}: parameter {name} holds non-finite values")
                state[name] = array
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError, ValidationError) as exc:
        raise ArtifactError(f"{path}: corrupt artifact ({exc})") from exc

    params = DenoiserParams(manifest.denoiser_config())
    try:
        params.load_state_dict(state)
    except ConfigurationError as exc:
        raise ArtifactError(f"{path}: {exc}") from exc
    logger.debug(f"Loaded {manifest.stage} artifact {path}")
    return params, manifest
