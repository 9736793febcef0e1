"""Scenario configuration: a strict, versioned JSON schema.

Unknown keys are rejected; every physical quantity is SI.  Shipped presets
embed the published control-parameter tables.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from importlib import resources

import numpy as np

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    scenario: str
    schema_version: int = SCHEMA_VERSION
    name: str = ""
    duration_s: float = 10.0
    control_dt: float = 1e-3
    substeps: int = 4
    record_every: int = 10
    seed: int = 0
    gravity: list = field(default_factory=lambda: [0.0, 0.0, -9.81])
    controller: str = "pidc"                  # pidc | mqp
    # plant
    object_mass: float = 1.0
    object_side: float = 0.6
    mu_ground: float = 0.7
    mu_hand: float = 0.5
    xi_hand: float = 0.1
    hand_patch: list = field(default_factory=lambda: [0.05, 0.05])
    robot_overrides: dict = field(default_factory=dict)
    mass_perturbation: bool = False
    mass_perturbation_fraction: float = 0.1
    # controller details
    gains: dict = field(default_factory=dict)
    object_gravity_ff: bool = True
    object_inertia_ff: bool = True
    slip_tol: float = 1e-3
    qp_max_iter: int = 200
    qp_tol_abs: float = 1e-8
    qp_tol_rel: float = 1e-6
    baumgarte_alpha: float = 50.0
    baumgarte_beta: float = 50.0
    # scenario specifics
    trajectory: dict = field(default_factory=dict)
    perturbations: list = field(default_factory=list)
    out_dir: str = "runs"


_REQUIRED_GAINS = ("torso_kp", "torso_kd", "object_kp", "object_kd")


def validate(raw: dict, path: str = "<config>") -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    known = {f.name for f in fields(RunConfig)}
    for key in raw:
        if key not in known:
            raise ConfigError(f"{path}: unknown key {key!r}")
    if "scenario" not in raw:
        raise ConfigError(f"{path}: missing required key 'scenario'")
    cfg = RunConfig(**raw)
    if cfg.schema_version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: schema_version {cfg.schema_version} "
                          f"not supported (expected {SCHEMA_VERSION})")
    if cfg.controller not in ("pidc", "mqp"):
        raise ConfigError(f"{path}: controller must be 'pidc' or 'mqp'")
    if cfg.duration_s <= 0 or cfg.control_dt <= 0 or cfg.substeps < 1:
        raise ConfigError(f"{path}: duration_s/control_dt/substeps out of range")
    for g in _REQUIRED_GAINS:
        if g not in cfg.gains:
            raise ConfigError(f"{path}: gains.{g} is required")
        v = np.asarray(cfg.gains[g], dtype=float)
        if v.size != 6 or np.any(v < 0):
            raise ConfigError(f"{path}: gains.{g} must be 6 nonnegative values")
    if cfg.scenario == "sec4b":
        for g in ("feet_kp", "feet_kd"):
            if g not in cfg.gains:
                raise ConfigError(f"{path}: gains.{g} is required for walking")
            if np.asarray(cfg.gains[g], dtype=float).size != 3:
                raise ConfigError(f"{path}: gains.{g} must be 3 values")
    for i, p in enumerate(cfg.perturbations):
        for key in ("target", "wrench", "t_on", "t_off"):
            if key not in p:
                raise ConfigError(f"{path}: perturbations[{i}].{key} missing")
        if len(p["wrench"]) != 6:
            raise ConfigError(f"{path}: perturbations[{i}].wrench must have 6 entries")
    return cfg


def load(path: str) -> RunConfig:
    try:
        with open(path) as f:
            raw = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}:{e.lineno}: invalid JSON: {e.msg}") from None
    return validate(raw, path)


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """`key=value` overrides with dotted paths into nested dicts."""
    for ov in overrides:
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} is not key=value")
        key, _, value = ov.partition("=")
        try:
            parsed = json.loads(value)
        except json.JSONDecodeError:
            parsed = value
        parts = key.split(".")
        if parts[0] not in {f.name for f in fields(RunConfig)}:
            raise ConfigError(f"override targets unknown key {parts[0]!r}")
        if len(parts) == 1:
            setattr(cfg, parts[0], parsed)
        else:
            node = getattr(cfg, parts[0])
            for p in parts[1:-1]:
                node = node[p]
            node[parts[-1]] = parsed
    return cfg


def preset_names() -> list[str]:
    root = resources.files("comanip").joinpath("presets")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset(name: str) -> RunConfig:
    if name.endswith(".json"):
        name = name[:-5]
    name = name.split("/")[-1]
    ref = resources.files("comanip").joinpath(f"presets/{name}.json")
    if not ref.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {preset_names()}")
    raw = json.loads(ref.read_text())
    return validate(raw, f"preset:{name}")


def resolve(path_or_preset: str) -> RunConfig:
    """A real file path wins; otherwise fall back to a packaged preset."""
    import os
    if os.path.exists(path_or_preset):
        return load(path_or_preset)
    return load_preset(path_or_preset)
