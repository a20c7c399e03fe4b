# src/genconv/run_config.py
from __future__ import annotations

import copy
import hashlib
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import orjson
from pydantic import ValidationError

from .domain.models import ModelConfig, RunConfig
from .errors import ConfigError
from .logging import get_component_logger
from .services.checkpoint import config_bytes

log = get_component_logger("run_config")


def available_presets() -> List[str]:
    return sorted(
        p.name[: -len(".json")]
        for p in resources.files("genconv.config").iterdir()
        if p.name.endswith(".json")
    )


def _parse(raw: bytes, origin: str) -> Dict[str, Any]:
    try:
        data = orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"{origin}: invalid JSON ({e})") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{origin}: top level must be an object")
    return data


def load_preset_dict(name: str) -> Dict[str, Any]:
    resource = resources.files("genconv.config") / f"{name}.json"
    if not resource.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(available_presets())}")
    return _parse(resource.read_bytes(), f"preset {name}")


def deep_merge(base: Mapping[str, Any], overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """Nested dicts merge key by key; any other value in ``overrides`` replaces the base value."""
    merged = copy.deepcopy(dict(base))
    for key, value in overrides.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), Mapping):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def validate_run_config(data: Mapping[str, Any], origin: str = "config") -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise ConfigError(f"{origin}: {where}: {first['msg']} ({e.error_count()} error(s))") from e


def load_run_config(
    path: Optional[str] = None,
    preset: Optional[str] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> RunConfig:
    """
    Preset (if any), then the config file on top, then ``overrides`` (CLI flags).
    Unknown keys anywhere in the tree are rejected.
    """
    data: Dict[str, Any] = load_preset_dict(preset) if preset else {}
    origin = f"preset {preset}" if preset else "config"
    if path:
        file = Path(path)
        if not file.is_file():
            raise ConfigError(f"config file not found: {path}")
        data = deep_merge(data, _parse(file.read_bytes(), path))
        origin = path
    if overrides:
        data = deep_merge(data, overrides)
    if not data:
        raise ConfigError("no configuration given (use --config or --preset)")
    config = validate_run_config(data, origin)
    log.info("run_config_loaded", origin=origin, config_hash=config_hash(config.model)[:12])
    return config


def config_hash(config: ModelConfig) -> str:
    """sha256 over the canonical (sorted-key) JSON form of a model config."""
    return hashlib.sha256(config_bytes(config)).hexdigest()
