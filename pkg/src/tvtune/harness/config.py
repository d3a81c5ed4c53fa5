"""Flat ``section.key = value`` run configuration.

Blank lines and ``#`` comments are ignored. Every key must name a field of
one of the known sections; anything else is rejected so a typo cannot
silently change an experiment.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from ..baselines import GaConfig
from ..controller import ControllerConfig
from ..ddpg import Hyperparams
from ..dynamics import TireParams, VehicleParams
from ..errors import ConfigError

SECTIONS = {
    "ddpg": Hyperparams,
    "vehicle": VehicleParams,
    "tire": TireParams,
    "controller": ControllerConfig,
    "ga": GaConfig,
}
# EpisodeConfig holds a maneuver object, so its scalar knobs are listed by hand
EPISODE_KEYS = {
    "speed_min": float, "speed_max": float, "mu_min": float, "mu_max": float,
    "agent_sample_time": float, "sim_dt": float, "episode_length": float,
    "handwheel_deg": float, "torque_ramp": float, "reward_mode": str,
}
RUN_KEYS = {"seed": int, "mode": str, "model": str, "out": str}
MODES = ("train", "eval", "sweep", "generalize", "ga-tune")


@dataclass
class RunConfig:
    mode: str = "train"
    seed: int = 0
    model: str | None = None
    out: str | None = None
    overrides: dict = field(default_factory=dict)   # section -> {field: value}

    def section(self, name: str) -> dict:
        return dict(self.overrides.get(name, {}))

    def build(self, name: str):
        """Instantiate the dataclass for ``name`` with this config's overrides."""
        cls = SECTIONS[name]
        try:
            return cls(**self.section(name))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}] {exc}") from None

    def episode(self, key, default):
        return self.overrides.get("episode", {}).get(key, default)


def _coerce(raw: str, proto, key: str):
    """Parse ``raw`` to the type of ``proto`` (a default value or a type)."""
    kind = proto if isinstance(proto, type) else type(proto)
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is tuple:
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if proto is None or kind is type(None):
            return float(raw)
        return str(raw).strip()
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind.__name__}") from None


def _field_default(cls, name):
    for f in dataclasses.fields(cls):
        if f.name == name:
            if f.default is not dataclasses.MISSING:
                return f.default
            if f.default_factory is not dataclasses.MISSING:
                return f.default_factory()
    return dataclasses.MISSING


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    cfg = RunConfig()
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        if "." not in key:
            raise ConfigError(f"{source}:{lineno}: key {key!r} needs a section prefix")
        section, name = key.split(".", 1)
        if section == "run":
            if name not in RUN_KEYS:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            setattr(cfg, name, _coerce(raw, RUN_KEYS[name], key))
        elif section == "episode":
            if name not in EPISODE_KEYS:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            cfg.overrides.setdefault("episode", {})[name] = _coerce(raw, EPISODE_KEYS[name], key)
        elif section in SECTIONS:
            default = _field_default(SECTIONS[section], name)
            if default is dataclasses.MISSING:
                raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
            cfg.overrides.setdefault(section, {})[name] = _coerce(raw, default, key)
        else:
            raise ConfigError(f"{source}:{lineno}: unknown section {section!r}")
    if cfg.mode not in MODES:
        raise ConfigError(f"{source}: run.mode must be one of {', '.join(MODES)}")
    for name in SECTIONS:
        if name in cfg.overrides:
            cfg.build(name)     # surface validation errors at load time
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text(encoding="utf-8"), str(p))
