"""Experiment configuration: one YAML file covering network, profiles, solver,
agent, reward, droop, and evaluation settings."""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Union

import yaml

from .ddpg import DdpgConfig
from .environment import RewardConfig
from .inverter import DroopCurve
from .power_flow import SolverOptions


class ConfigError(ValueError):
    """The experiment file does not match the documented schema."""


@dataclass(frozen=True)
class TrainingSection:
    episodes: int = 500
    checkpoint_every: int = 100
    # mixture over the named categories plus an optional fraction of draws
    # replayed from profile hours outside the evaluation slice
    category_weights: dict = field(
        default_factory=lambda: {"evening": 1.0, "midday_peak": 1.0, "normal": 1.0}
    )
    profile_fraction: float = 0.0
    # fraction of draws sampled uniformly over the whole operating box
    envelope_fraction: float = 0.0


@dataclass(frozen=True)
class EvaluationSection:
    start_hour: int = 0
    hours: int = 8760
    workers: int = 1


@dataclass(frozen=True)
class ExperimentConfig:
    network: str = ""
    profiles: str = ""
    seed: int = 0
    solver: SolverOptions = field(default_factory=SolverOptions)
    agent: DdpgConfig = field(default_factory=DdpgConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    droop: DroopCurve = field(default_factory=DroopCurve)
    training: TrainingSection = field(default_factory=TrainingSection)
    evaluation: EvaluationSection = field(default_factory=EvaluationSection)


_SECTIONS = {
    "solver": SolverOptions,
    "agent": DdpgConfig,
    "reward": RewardConfig,
    "droop": DroopCurve,
    "training": TrainingSection,
    "evaluation": EvaluationSection,
}


def _build_section(cls, raw: dict, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"section {where!r} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {where!r}: {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        if key == "hidden":
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value in section {where!r}: {exc}") from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Read an experiment file; omitted sections and keys take the defaults."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")

    top_known = {"network", "profiles", "seed"} | set(_SECTIONS)
    unknown = set(raw) - top_known
    if unknown:
        raise ConfigError(f"{path}: unknown top-level keys: {sorted(unknown)}")

    kwargs: dict = {}
    for key in ("network", "profiles"):
        if key in raw:
            value = str(raw[key])
            base = path.parent / value
            kwargs[key] = str(base) if base.exists() else value
    if "seed" in raw:
        kwargs["seed"] = int(raw["seed"])
    for name, cls in _SECTIONS.items():
        if name in raw:
            kwargs[name] = _build_section(cls, raw[name], name)
    return ExperimentConfig(**kwargs)
