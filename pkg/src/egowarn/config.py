"""Run configuration: one flat key set, one text format, one CLI mapping.

A .cfg file is `key = value` lines (# comments allowed). Keys are
`section.field` taken straight from the per-module config dataclasses plus
the top-level `seed`; unknown keys are errors. Every CLI override flag maps
1:1 onto a key. The full key list with defaults lives in FORMATS.md and is
reproducible via `default_config_text()`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace

from .collision import CollisionConfig
from .evaluate import EvalConfig
from .predict import PredictorConfig
from .preprocess import SmootherConfig
from .scenario import NoiseConfig
from .tracking import TrackerConfig


class ConfigError(ValueError):
    """Unknown key, bad value, or malformed config line."""


@dataclass
class PipelineConfig:
    delay_ms: float = 0.0  # artificial per-frame load, for budget testing


@dataclass
class RunConfig:
    seed: int = 0
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    smoother: SmootherConfig = field(default_factory=SmootherConfig)
    predictor: PredictorConfig = field(default_factory=PredictorConfig)
    collision: CollisionConfig = field(default_factory=CollisionConfig)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)

    def copy(self) -> "RunConfig":
        return replace(
            self,
            tracker=replace(self.tracker),
            smoother=replace(self.smoother),
            predictor=replace(self.predictor),
            collision=replace(self.collision),
            noise=replace(self.noise),
            eval=replace(self.eval),
            pipeline=replace(self.pipeline),
        )


_SECTIONS = ("tracker", "smoother", "predictor", "collision", "noise", "eval", "pipeline")


def config_keys() -> list[tuple[str, type, object]]:
    """All (key, type, default) triples, in stable order."""
    keys: list[tuple[str, type, object]] = [("seed", int, 0)]
    defaults = RunConfig()
    for section in _SECTIONS:
        sub = getattr(defaults, section)
        for f in fields(sub):
            keys.append((f"{section}.{f.name}", type(getattr(sub, f.name)), getattr(sub, f.name)))
    return keys


def _parse_value(key: str, raw: str, target_type: type):
    raw = raw.strip()
    try:
        if target_type is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def set_key(cfg: RunConfig, key: str, raw_value: str) -> None:
    """Apply one `key = value` override in place."""
    for known_key, target_type, _ in config_keys():
        if known_key == key:
            value = _parse_value(key, raw_value, target_type)
            if key == "seed":
                cfg.seed = value
            else:
                section, name = key.split(".", 1)
                setattr(getattr(cfg, section), name, value)
            return
    raise ConfigError(f"unknown config key {key!r}")


def get_key(cfg: RunConfig, key: str):
    if key == "seed":
        return cfg.seed
    if "." in key:
        section, name = key.split(".", 1)
        if section in _SECTIONS:
            sub = getattr(cfg, section)
            if any(f.name == name for f in dataclasses.fields(sub)):
                return getattr(sub, name)
    raise ConfigError(f"unknown config key {key!r}")


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    cfg = (base or RunConfig()).copy()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        try:
            set_key(cfg, key.strip(), value)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from exc
    return cfg


def read_config(path: str, base: RunConfig | None = None) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), base)


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return repr(value) if isinstance(value, float) else str(value)


def config_text(cfg: RunConfig) -> str:
    lines = []
    for key, _, _ in config_keys():
        lines.append(f"{key} = {format_value(get_key(cfg, key))}")
    return "\n".join(lines) + "\n"


def default_config_text() -> str:
    return config_text(RunConfig())


def write_config(path: str, cfg: RunConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_text(cfg))


def resolve_config(text: str | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Defaults, then a .cfg document, then individual key overrides."""
    cfg = parse_config_text(text, None) if text else RunConfig()
    for key, value in (overrides or {}).items():
        set_key(cfg, key, value)
    return cfg
