"""Flat ``key = value`` run configuration covering model and training fields."""

from __future__ import annotations

import dataclasses
import types
import typing

from .errors import ConfigError
from .model import ModelConfig
from .trainer import TrainConfig

_SECTIONS = (ModelConfig, TrainConfig)


def known_keys() -> dict:
    """Map each accepted key to ``(dataclass, field)``."""
    keys = {}
    for cls in _SECTIONS:
        hints = typing.get_type_hints(cls)
        for f in dataclasses.fields(cls):
            keys[f.name] = (cls, hints[f.name])
    return keys


def parse_value(key: str, raw: str, kind):
    raw = raw.strip()
    optional = typing.get_origin(kind) in (typing.Union, types.UnionType)
    if optional:
        if raw.lower() in ("none", ""):
            return None
        kind = next(a for a in typing.get_args(kind) if a is not type(None))
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    raise ConfigError(f"unsupported type for {key}")


def parse_config_text(text: str) -> dict:
    keys = known_keys()
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in keys:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = parse_value(key, raw, keys[key][1])
    return values


def read_config(path) -> dict:
    try:
        with open(path) as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc


def build_configs(values: dict) -> tuple[ModelConfig, TrainConfig]:
    keys = known_keys()
    unknown = set(values) - set(keys)
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    parts = {cls: {} for cls in _SECTIONS}
    for key, value in values.items():
        parts[keys[key][0]][key] = value
    if "dt" not in values and "num_steps" in values:
        parts[ModelConfig]["dt"] = 1.0 / values["num_steps"]
    try:
        return ModelConfig(**parts[ModelConfig]), TrainConfig(**parts[TrainConfig])
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def format_config(model_cfg: ModelConfig, train_cfg: TrainConfig) -> str:
    lines = []
    for cfg in (model_cfg, train_cfg):
        for f in dataclasses.fields(cfg):
            lines.append(f"{f.name} = {getattr(cfg, f.name)}")
    return "\n".join(lines) + "\n"
