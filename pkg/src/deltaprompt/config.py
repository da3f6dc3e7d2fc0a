"""Experiment configuration and its on-disk key=value format.

Configs are flat ``key = value`` pairs under section headers, readable and
diff-friendly.  `save_config` / `load_config` round-trip losslessly.  The
full schema with defaults is what `ExperimentConfig()` constructs; every
field is validated on load so the CLI can fail fast with a clear message.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .losses import CONSTRAINT_MODES
from .optim import SCHEDULES
from .prompts import default_bottleneck_ratio

__all__ = ["ExperimentConfig", "load_config", "save_config", "DELTA_REFERENCES"]

DELTA_REFERENCES = ("same_image", "class_mean")


@dataclass
class ExperimentConfig:
    # run
    seed: int = 0
    # dataset
    n_classes: int = 8
    per_class: int = 40
    image_size: int = 16
    shots: int = 16
    # model
    feature_dim: int = 32
    context_length: int = 4
    bottleneck_ratio: int = 0  # 0 means "auto": 16 when d >= 32 else 4
    tau: float = 0.07
    # training
    epochs: int = 10
    learning_rate: float = 0.002
    momentum: float = 0.9
    schedule: str = "cosine"
    alpha: float = 1.0
    beta: float = 1.0
    margin: float = 0.2
    constraint_mode: str = "constraints4"
    weighted_sampling: bool = False
    delta_reference: str = "same_image"
    # profiling
    profile_samples: int = 100
    profile_temperature: float = 1.0
    # output
    out_dir: str = "runs/default"

    def resolved_bottleneck_ratio(self) -> int:
        return self.bottleneck_ratio or default_bottleneck_ratio(self.feature_dim)

    def validate(self) -> "ExperimentConfig":
        c = self
        checks = [
            (c.seed >= 0, f"seed must be >= 0, got {c.seed}"),
            (c.n_classes >= 4 and c.n_classes % 2 == 0,
             f"n_classes must be even and >= 4, got {c.n_classes}"),
            (c.per_class >= 24, f"per_class must be >= 24, got {c.per_class}"),
            (c.image_size >= 8, f"image_size must be >= 8, got {c.image_size}"),
            (1 <= c.shots <= c.per_class - 2,
             f"shots={c.shots} incompatible with per_class={c.per_class}"),
            (c.feature_dim >= 4, f"feature_dim must be >= 4, got {c.feature_dim}"),
            (c.context_length >= 1, f"context_length must be >= 1, got {c.context_length}"),
            (c.bottleneck_ratio >= 0, f"bottleneck_ratio must be >= 0, got {c.bottleneck_ratio}"),
            (c.tau > 0, f"tau must be positive, got {c.tau}"),
            (c.epochs >= 1, f"epochs must be >= 1, got {c.epochs}"),
            (c.learning_rate >= 0, f"learning_rate must be >= 0, got {c.learning_rate}"),
            (0 <= c.momentum < 1, f"momentum must be in [0, 1), got {c.momentum}"),
            (c.schedule in SCHEDULES, f"schedule must be one of {SCHEDULES}, got {c.schedule!r}"),
            (c.alpha >= 0 and c.beta >= 0, "alpha and beta must be non-negative"),
            (c.alpha > 0 or c.beta > 0, "alpha and beta cannot both be zero"),
            (c.margin > 0, f"margin must be positive, got {c.margin}"),
            (c.constraint_mode in CONSTRAINT_MODES,
             f"constraint_mode must be one of {CONSTRAINT_MODES}, got {c.constraint_mode!r}"),
            (c.delta_reference in DELTA_REFERENCES,
             f"delta_reference must be one of {DELTA_REFERENCES}, got {c.delta_reference!r}"),
            (c.profile_samples >= 1, f"profile_samples must be >= 1, got {c.profile_samples}"),
            (c.profile_temperature > 0,
             f"profile_temperature must be positive, got {c.profile_temperature}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        d = c.feature_dim
        r = c.resolved_bottleneck_ratio()
        if d % r != 0 or d // r < 1:
            raise ConfigError(f"feature_dim {d} not divisible by bottleneck ratio {r}")
        return self


# section -> [(config field, file key)]
_LAYOUT: dict[str, list[tuple[str, str]]] = {
    "run": [("seed", "seed")],
    "dataset": [
        ("n_classes", "classes"),
        ("per_class", "per_class"),
        ("image_size", "image_size"),
        ("shots", "shots"),
    ],
    "model": [
        ("feature_dim", "feature_dim"),
        ("context_length", "context_length"),
        ("bottleneck_ratio", "bottleneck_ratio"),
        ("tau", "tau"),
    ],
    "training": [
        ("epochs", "epochs"),
        ("learning_rate", "learning_rate"),
        ("momentum", "momentum"),
        ("schedule", "schedule"),
        ("alpha", "alpha"),
        ("beta", "beta"),
        ("margin", "margin"),
        ("constraint_mode", "constraint_mode"),
        ("weighted_sampling", "weighted_sampling"),
        ("delta_reference", "delta_reference"),
    ],
    "profiling": [
        ("profile_samples", "samples"),
        ("profile_temperature", "temperature"),
    ],
    "output": [("out_dir", "dir")],
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_value(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    try:
        if kind == "bool":
            low = raw.lower()
            if low in ("on", "true", "yes", "1"):
                return True
            if low in ("off", "false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "int":
            if name == "bottleneck_ratio" and raw.lower() == "auto":
                return 0
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {exc}") from None


def save_config(config: ExperimentConfig, path) -> None:
    config.validate()
    lines = []
    for section, entries in _LAYOUT.items():
        lines.append(f"[{section}]")
        for attr, key in entries:
            lines.append(f"{key} = {_format_value(getattr(config, attr))}")
        lines.append("")
    Path(path).write_text("\n".join(lines))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(path.read_text())
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    known = {sec: dict(entries) for sec, entries in (
        (s, [(k, a) for a, k in items]) for s, items in _LAYOUT.items()
    )}
    values = {}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in known[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            attr = known[section][key]
            values[attr] = _parse_value(attr, raw)
    config = ExperimentConfig(**values)
    return config.validate()
