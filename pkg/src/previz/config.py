"""Pipeline settings, loadable from a JSON file with any subset of sections."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .agents.protocols import LoopConfig
from .codec import CodecError, decode
from .regions import RegionLossParams

BACKENDS = ("scripted", "replay", "remote")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    region: RegionLossParams = field(default_factory=RegionLossParams)
    loop: LoopConfig = field(default_factory=LoopConfig)
    camera: Mapping[str, Any] = field(default_factory=dict)  # overrides for registry constants
    cell_size: float = 0.1
    character_radius: float = 0.3
    ornaments: bool = False
    backend: str = "scripted"
    fixture: Optional[str] = None  # scripted backend fixture file
    recording: Optional[str] = None  # replay backend transcript file
    record_to: Optional[str] = None  # where to save a recording of backend calls

    def __post_init__(self) -> None:
        if self.backend not in BACKENDS:
            raise ValueError(f"backend must be one of {', '.join(BACKENDS)}")
        if not self.cell_size > 0:
            raise ValueError("cell_size must be > 0")
        if self.character_radius < 0:
            raise ValueError("character_radius must be >= 0")


def config_from_dict(data: Mapping[str, Any]) -> PipelineConfig:
    try:
        return decode(PipelineConfig, dict(data))
    except CodecError as exc:
        raise ConfigError(f"config {exc}") from exc


def load_config(path: Optional[Union[str, Path]] = None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{p}: expected a JSON object")
    cfg = config_from_dict(data)

    # relative fixture/recording paths are taken relative to the config file
    def rel(v: Optional[str]) -> Optional[str]:
        return v if v is None or Path(v).is_absolute() else str(p.parent / v)

    return replace(cfg, fixture=rel(cfg.fixture), recording=rel(cfg.recording), record_to=rel(cfg.record_to))
