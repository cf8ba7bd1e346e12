"""Flat key = value run configuration with CLI-override precedence.

Values come from, in increasing precedence: dataclass defaults, a config
file, and ``--set key=value`` command-line overrides. Unknown keys are
rejected so typos fail loudly; every key has a documented default (the
``TrainConfig`` field defaults plus the run-level keys below).
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

from .errors import ConfigError
from .train import TrainConfig

# Run-level keys that live outside TrainConfig.
RUN_KEYS = {
    "n_frames": 8,
    "n_train_views": 4,
    "n_holdout_views": 2,
    "image_size": 64,
    "scene_family": "oscillation",
    "scene_points": 200,
    "fraction_static": 0.6,
    "amplitude": 0.3,
}


def _train_fields() -> dict:
    return {f.name: f for f in dataclasses.fields(TrainConfig)}


def known_keys() -> list[str]:
    return sorted(list(RUN_KEYS) + list(_train_fields()))


def _coerce(key: str, raw: str, default):
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    if isinstance(default, tuple):
        return tuple(int(x) for x in raw.replace(",", " ").split())
    return raw.strip()


def parse_config_text(text: str) -> dict:
    pairs = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs[key] = value
    return pairs


@dataclasses.dataclass
class RunConfig:
    """Resolved configuration: training fields plus run-level keys."""

    train: TrainConfig
    run: dict

    def dump(self) -> str:
        lines = []
        for key in sorted(RUN_KEYS):
            lines.append(f"{key} = {_fmt(self.run[key])}")
        for name in sorted(_train_fields()):
            lines.append(f"{name} = {_fmt(getattr(self.train, name))}")
        return "\n".join(lines) + "\n"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return " ".join(str(v) for v in value)
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def resolve_config(file_path: str | None = None,
                   overrides: list[str] | None = None) -> RunConfig:
    """Merge defaults, an optional config file, and key=value overrides."""
    fields = _train_fields()
    train_values = {name: f.default if f.default is not dataclasses.MISSING
                    else f.default_factory()
                    for name, f in fields.items()}
    run_values = dict(RUN_KEYS)

    def apply(pairs: dict, source: str):
        for key, raw in pairs.items():
            if key in fields:
                train_values[key] = _coerce(key, raw, train_values[key])
            elif key in run_values:
                run_values[key] = _coerce(key, raw, run_values[key])
            else:
                raise ConfigError(f"{source}: unknown config key {key!r}")

    if file_path is not None:
        apply(parse_config_text(Path(file_path).read_text()), str(file_path))
    if overrides:
        pairs = {}
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, value = item.split("=", 1)
            pairs[key.strip()] = value.strip()
        apply(pairs, "command line")
    return RunConfig(train=TrainConfig(**train_values), run=run_values)
