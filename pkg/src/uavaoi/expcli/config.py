"""Experiment configuration: INI files layered over a named profile.

Sections map onto the library's config dataclasses::

    [experiment]  algorithm, seeds, episodes, episode_length, window, ...
    [env]         EnvConfig fields (area_width / area_height give the bounds)
    [channel]     ChannelParams fields
    [mfhppo]      TrainConfig fields (episodes and episode_length come from [experiment])
    [dqn]         DqnConfig fields (same)
    [namas]       radius

Unknown sections or keys are errors so typos do not silently fall back to
defaults.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..baselines.madqn import DqnConfig
from ..channel import ChannelParams
from ..errors import ConfigError
from ..mfhppo.train import TrainConfig
from ..mmdp import EnvConfig
from ..world import Bounds

ALGORITHMS = ("mfhppo", "rstd", "namas", "madqn")
PROFILES = ("paper", "desk")


@dataclass(frozen=True)
class ExperimentSettings:
    algorithm: str = "mfhppo"
    seeds: tuple = (0,)
    episodes: int = 3000
    episode_length: int = 40
    window: int = 50  # final-window length for summaries
    moving_average: int = 50
    baselines: tuple = ("rstd", "namas")  # runs the summary compares against
    timing: bool = False  # record wall_ms; off keeps CSVs byte-reproducible
    workers: int = 1

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if self.episodes < 1 or self.episode_length < 1:
            raise ConfigError("episodes and episode_length must be positive")
        if self.window < 1 or self.moving_average < 1 or self.workers < 1:
            raise ConfigError("window, moving_average and workers must be positive")
        for b in self.baselines:
            if b not in ALGORITHMS or b == "mfhppo":
                raise ConfigError(f"unknown baseline {b!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    profile: str
    experiment: ExperimentSettings
    env: EnvConfig
    train: TrainConfig
    dqn: DqnConfig
    namas_radius: float | None = None
    sections: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        """Effective settings, section by section, as plain JSON values."""
        # a JSON round trip turns tuples into lists, so dicts compare equal to reloaded ones
        return json.loads(json.dumps({"profile": self.profile, **self.sections}, sort_keys=True))

    def with_algorithm(self, algorithm: str) -> "ExperimentConfig":
        return override(self, {"experiment": {"algorithm": algorithm}})


# Table II scale
_PAPER = {
    "experiment": {"episodes": 3000, "episode_length": 40, "seeds": (0,)},
    "env": {"n_uavs": 30, "n_sensors": 100, "area_width": 1000.0, "area_height": 1000.0},
    "channel": {},
    "mfhppo": {},
    "dqn": {"epsilon_decay_episodes": 1500},
    "namas": {},
}

# Laptop scale used by the acceptance suite. Longer episodes and a short
# discount give the learner enough samples per update at 300 episodes.
_DESK = {
    "experiment": {"episodes": 300, "episode_length": 100, "seeds": (0, 1, 2)},
    "env": {"n_uavs": 3, "n_sensors": 12, "area_width": 200.0, "area_height": 200.0,
            "aoi_scale": 10.0},
    "channel": {"mode": "threshold", "loss_threshold": 85.0},
    "mfhppo": {"encoder_width": 64, "hidden_width": 64, "k2": 0.0, "reward_scale": 0.025,
               "gamma": 0.9, "lr": 1e-4, "minibatch_size": 25, "epochs": 8,
               "use_lstm": False},
    "dqn": {},
    "namas": {},
}


def _schema() -> dict:
    env_fields = {f.name: f for f in dataclasses.fields(EnvConfig)
                  if f.name not in ("bounds", "channel")}
    env_fields["area_width"] = env_fields["area_height"] = None
    skip = {"episodes", "episode_length"}
    return {
        "experiment": {f.name: f for f in dataclasses.fields(ExperimentSettings)},
        "env": env_fields,
        "channel": {f.name: f for f in dataclasses.fields(ChannelParams)},
        "mfhppo": {f.name: f for f in dataclasses.fields(TrainConfig) if f.name not in skip},
        "dqn": {f.name: f for f in dataclasses.fields(DqnConfig) if f.name not in skip},
        "namas": {"radius": None},
    }


def _default_of(section: str, key: str):
    schema = _schema()
    if section not in schema:
        raise ConfigError(f"unknown section [{section}]")
    if key not in schema[section]:
        raise ConfigError(f"unknown key {key!r} in [{section}]")
    f = schema[section][key]
    if f is None:
        return {"area_width": 200.0, "area_height": 200.0, "radius": None}[key]
    if f.default is not dataclasses.MISSING:
        return f.default
    return f.default_factory()


def parse_value(section: str, key: str, raw: str):
    default = _default_of(section, key)
    text = raw.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [t.strip() for t in text.split(",") if t.strip()]
            kind = type(default[0]) if default else str
            return tuple(kind(t) for t in items)
        if default is None:
            if text.lower() in ("", "none"):
                return None
            if key == "centers":
                pts = [p for p in text.split(";") if p.strip()]
                return tuple(tuple(float(v) for v in p.split(",")) for p in pts)
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from exc


def _profile_sections(profile: str) -> dict:
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {PROFILES}")
    base = _PAPER if profile == "paper" else _DESK
    return {s: dict(v) for s, v in base.items()}


def _build(profile: str, sections: dict) -> ExperimentConfig:
    schema = _schema()
    for s, values in sections.items():
        if s not in schema:
            raise ConfigError(f"unknown section [{s}]")
        for k in values:
            if k not in schema[s]:
                raise ConfigError(f"unknown key {k!r} in [{s}]")
    full = {s: {k: sections.get(s, {}).get(k, _default_of(s, k)) for k in keys}
            for s, keys in schema.items()}
    exp = ExperimentSettings(**full["experiment"])
    e = dict(full["env"])
    bounds = Bounds(0.0, float(e.pop("area_width")), 0.0, float(e.pop("area_height")))
    channel = ChannelParams(**full["channel"])
    env = EnvConfig(bounds=bounds, channel=channel, **e)
    train = TrainConfig(episodes=exp.episodes, episode_length=exp.episode_length,
                        buffer_size=max(full["mfhppo"]["buffer_size"], exp.episode_length),
                        **{k: v for k, v in full["mfhppo"].items() if k != "buffer_size"})
    dqn = DqnConfig(episodes=exp.episodes, episode_length=exp.episode_length, **full["dqn"])
    return ExperimentConfig(profile, exp, env, train, dqn, full["namas"]["radius"], full)


def load_config(path: str | Path | None = None, profile: str = "desk",
                overrides: dict | None = None) -> ExperimentConfig:
    """Profile defaults, then the INI file at ``path``, then ``overrides``."""
    sections = _profile_sections(profile)
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        schema = _schema()
        for s in parser.sections():
            if s not in schema:
                raise ConfigError(f"{path}: unknown section [{s}]")
            for k, raw in parser.items(s):
                if k not in schema[s]:
                    raise ConfigError(f"{path}: unknown key {k!r} in [{s}]")
                sections.setdefault(s, {})[k] = parse_value(s, k, raw)
    for s, values in (overrides or {}).items():
        sections.setdefault(s, {}).update(values)
    return _build(profile, sections)


def override(cfg: ExperimentConfig, overrides: dict) -> ExperimentConfig:
    sections = {s: dict(v) for s, v in cfg.sections.items()}
    for s, values in overrides.items():
        sections.setdefault(s, {}).update(values)
    return _build(cfg.profile, sections)


def dump_ini(cfg: ExperimentConfig) -> str:
    """INI text that reproduces ``cfg`` when loaded with the same profile."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for s, values in cfg.sections.items():
        parser[s] = {k: _format_value(v) for k, v in values.items()}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def _format_value(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return "; ".join(",".join(repr(float(x)) for x in p) for p in v)
        return ", ".join(str(x) for x in v)
    return str(v)
