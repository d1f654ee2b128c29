"""Pipeline configuration: one file collecting every tunable, with defaults.

Config files are INI-style, line-oriented key=value under section headers.
Unknown sections or keys are rejected (typo safety); every field has a
documented default, so an empty config is valid. A parameter-space file for
sweeps declares per-key ranges: "section.key low high" per line.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .detection import ClusterConfig, ObjectModel
from .segmentation import SegmentationConfig
from .tracking import TrackerConfig


class ConfigError(ValueError):
    """Bad configuration file, key, or value."""


@dataclass
class FilterConfig:
    margin: float = 0.1   # box inflation for retroactive point removal

    def validate(self) -> None:
        if self.margin < 0:
            raise ConfigError("margin must be non-negative")


@dataclass
class MetricsConfig:
    match_threshold: float = 0.5
    dynamic_only: bool = True

    def validate(self) -> None:
        if self.match_threshold <= 0:
            raise ConfigError("match_threshold must be positive")


@dataclass
class GeneralConfig:
    sentinel: float = 200.0
    fallback_dt: float = 0.1

    def validate(self) -> None:
        if self.sentinel <= 0 or self.fallback_dt <= 0:
            raise ConfigError("sentinel and fallback_dt must be positive")


@dataclass
class PipelineConfig:
    general: GeneralConfig = field(default_factory=GeneralConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    clustering: ClusterConfig = field(default_factory=ClusterConfig)
    object_model: ObjectModel = field(default_factory=ObjectModel)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    metrics: MetricsConfig = field(default_factory=MetricsConfig)

    def validate(self) -> "PipelineConfig":
        for section in _sections(self):
            try:
                getattr(self, section).validate()
            except ValueError as exc:
                raise ConfigError(f"[{section}] {exc}") from exc
        return self

    def copy(self) -> "PipelineConfig":
        return PipelineConfig(**{
            s: dataclasses.replace(getattr(self, s)) for s in _sections(self)
        })


def _sections(cfg: PipelineConfig):
    return [f.name for f in dataclasses.fields(cfg)]


def _coerce(section: str, key: str, raw: str, current):
    if isinstance(current, bool):
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{section}.{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(current, int):
            return int(raw)
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: {exc}") from exc


def _set_key(cfg: PipelineConfig, section: str, key: str, raw: str) -> None:
    if section not in _sections(cfg):
        raise ConfigError(f"unknown section [{section}]")
    sub = getattr(cfg, section)
    if key not in {f.name for f in dataclasses.fields(sub)}:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    setattr(sub, key, _coerce(section, key, raw, getattr(sub, key)))


def load_config(path=None, overrides=()) -> PipelineConfig:
    """Defaults, optionally updated from an INI file and section.key=value
    override strings (in that order)."""
    cfg = PipelineConfig()
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                _set_key(cfg, section, key, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        dotted, raw = item.split("=", 1)
        section, key = dotted.split(".", 1)
        _set_key(cfg, section.strip(), key.strip(), raw.strip())
    return cfg.validate()


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for section in _sections(cfg):
        lines.append(f"[{section}]")
        sub = getattr(cfg, section)
        for f in dataclasses.fields(sub):
            lines.append(f"{f.name} = {getattr(sub, f.name)}")
        lines.append("")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# parameter sweep spaces

_ODD_KEYS = {"min_kernel", "max_kernel"}


@dataclass
class SpaceEntry:
    section: str
    key: str
    low: float
    high: float
    is_int: bool


def read_space(path) -> list[SpaceEntry]:
    """Parse a sweep space file: "section.key low high" lines."""
    template = PipelineConfig()
    entries = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or "." not in parts[0]:
                raise ConfigError(f"{path}:{lineno}: expected 'section.key low high'")
            section, key = parts[0].split(".", 1)
            if section not in _sections(template):
                raise ConfigError(f"{path}:{lineno}: unknown section [{section}]")
            sub = getattr(template, section)
            if key not in {f.name for f in dataclasses.fields(sub)}:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                low, high = float(parts[1]), float(parts[2])
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: {exc}") from exc
            if high < low:
                raise ConfigError(f"{path}:{lineno}: need low <= high")
            entries.append(SpaceEntry(section, key, low, high,
                                      isinstance(getattr(sub, key), int)
                                      and not isinstance(getattr(sub, key), bool)))
    if not entries:
        raise ConfigError(f"{path}: empty parameter space")
    return entries


def sample_config(base: PipelineConfig, space: list[SpaceEntry],
                  rng: np.random.Generator) -> PipelineConfig:
    """Uniform sample from the declared ranges on top of a base config."""
    cfg = base.copy()
    for entry in space:
        sub = getattr(cfg, entry.section)
        if entry.is_int:
            value = int(rng.integers(int(entry.low), int(entry.high) + 1))
            if entry.key in _ODD_KEYS and value % 2 == 0:
                value += 1 if value < entry.high else -1
        else:
            value = float(rng.uniform(entry.low, entry.high))
        setattr(sub, entry.key, value)
    return cfg.validate()
