"""Runtime configuration with layered precedence: flags > environment > file > defaults."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

from .errors import RangeError, SchemaError

__all__ = ["Config", "ENV_PREFIX", "load_config"]

ENV_PREFIX = "BLOBVID_"

_INTERP_METHODS = ("linear", "slerp")
_ORIENTATIONS = ("as_printed", "standard")


@dataclass(frozen=True)
class Config:
    feature_h: int = 16
    feature_w: int = 16
    anchor_interval: int = 8
    rescale: float = 1.0
    fourier_freqs: int = 8
    seed: int = 0
    dense_cap: int = 8192
    interp_method: str = "linear"
    interp_orientation: str = "as_printed"

    def __post_init__(self):
        if self.feature_h < 1 or self.feature_w < 1:
            raise RangeError(f"feature grid must be at least 1x1, got {self.feature_h}x{self.feature_w}")
        if self.anchor_interval < 1:
            raise RangeError(f"anchor interval must be >= 1, got {self.anchor_interval}")
        if not self.rescale > 0:
            raise RangeError(f"rescale must be positive, got {self.rescale}")
        if self.fourier_freqs < 1:
            raise RangeError(f"need at least one Fourier frequency, got {self.fourier_freqs}")
        if self.dense_cap < 1:
            raise RangeError(f"dense cap must be >= 1, got {self.dense_cap}")
        if self.interp_method not in _INTERP_METHODS:
            raise RangeError(f"interp method must be one of {_INTERP_METHODS}, got {self.interp_method!r}")
        if self.interp_orientation not in _ORIENTATIONS:
            raise RangeError(
                f"interp orientation must be one of {_ORIENTATIONS}, got {self.interp_orientation!r}"
            )


def _coerce(name: str, kind: type, raw: Any):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return str(raw)
    except (TypeError, ValueError) as e:
        raise SchemaError(f"config field {name}: cannot read {raw!r} as {kind.__name__}") from e


def load_config(config_file: str | None = None,
                env: Mapping[str, str] | None = None,
                overrides: Mapping[str, Any] | None = None) -> Config:
    """Build the effective Config.

    Values are applied defaults-first, then the JSON config file, then
    BLOBVID_* environment variables, then explicit overrides (CLI flags).
    Unknown file keys are rejected so typos fail loudly.
    """
    if env is None:
        env = os.environ
    field_types = {f.name: f.type for f in fields(Config)}
    kinds = {"feature_h": int, "feature_w": int, "anchor_interval": int, "rescale": float,
             "fourier_freqs": int, "seed": int, "dense_cap": int,
             "interp_method": str, "interp_orientation": str}
    values: dict[str, Any] = {}
    if config_file is not None:
        doc = json.loads(Path(config_file).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise SchemaError("config file must hold a JSON object")
        for key, raw in doc.items():
            if key not in field_types:
                raise SchemaError(f"unknown config key {key!r}")
            values[key] = _coerce(key, kinds[key], raw)
    for name in field_types:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            values[name] = _coerce(name, kinds[name], env[env_key])
    if overrides:
        for key, raw in overrides.items():
            if raw is None:
                continue
            if key not in field_types:
                raise SchemaError(f"unknown config override {key!r}")
            values[key] = _coerce(key, kinds[key], raw)
    return Config(**values)
