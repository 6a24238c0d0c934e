"""Declarative pipeline configuration.

One JSON file holds every tunable the pipeline exposes; environment
variables of the form PAIRREC_<FIELD> override individual entries, so a
deployment can pin e.g. PAIRREC_THRESHOLD=0.75 without editing the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from pathlib import Path

ENV_PREFIX = "PAIRREC_"


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 0.15
    beta: float = 0.1
    d: int = 20
    k: int = 10
    gamma: float = 3.0
    lr: float = 0.01
    threshold: float = 0.7
    buckets: int = 3

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if not -1.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [-1, 1], got {self.threshold}")
        if self.buckets < 1:
            raise ValueError(f"buckets must be >= 1, got {self.buckets}")


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}
_INT_FIELDS = {"d", "k", "buckets"}


def _coerce(name: str, raw):
    if name in _INT_FIELDS:
        value = int(raw)
    else:
        value = float(raw)
    return value


def load_config(path=None, env=None) -> PipelineConfig:
    """Config from JSON plus PAIRREC_* overrides; defaults when both absent."""
    values = {}
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"config root must be an object, got {type(data).__name__}")
        for key, raw in data.items():
            if key not in _TYPES:
                raise ValueError(f"unknown config field: {key!r}")
            values[key] = _coerce(key, raw)
    env = os.environ if env is None else env
    for name in _TYPES:
        raw = env.get(ENV_PREFIX + name.upper())
        if raw is not None:
            try:
                values[name] = _coerce(name, raw)
            except ValueError:
                raise ValueError(
                    f"bad value for {ENV_PREFIX + name.upper()}: {raw!r}"
                ) from None
    return PipelineConfig(**values)


def save_config(path, config: PipelineConfig) -> None:
    payload = {f.name: getattr(config, f.name) for f in fields(PipelineConfig)}
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
