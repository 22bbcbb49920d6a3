"""YAML run configuration with a strict schema.

Unknown keys are rejected (a typo in a hyperparameter name must fail loudly,
not silently fall back to a default), missing required fields are reported
by their dotted path, and all values land in the typed config dataclasses.
See README for the documented schema and units.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
import yaml

from .env import DisturbanceConfig, DRConfig, EnvConfig
from .evaluate import EvalConfig
from .physics import PhysicalParams
from .ppo import TrainConfig
from .rewards import RewardConstants


class ConfigError(ValueError):
    pass


_PHYSICS_KEYS = {
    "quad_mass",
    "quad_inertia",
    "arm_half_span",
    "thrust_to_torque",
    "nominal_thrust_cap",
    "payload_mass",
    "payload_radius",
    "cable_length",
    "cable_stiffness",
    "cable_damping",
    "ground_stiffness",
    "ground_damping",
    "friction_coefficient",
    "quad_collision_radius",
    "gravity",
    "dt",
}

_TUPLE_KEYS = {
    "thrust_base_range",
    "thrust_limits",
    "lag_time_range",
    "shell_radius_range",
}


def _field_names(cls) -> set:
    return {f.name for f in fields(cls)}


def _check_keys(section: str, data: dict, allowed: set) -> None:
    if not isinstance(data, dict):
        raise ConfigError(f"section '{section or '<root>'}' must be a mapping")
    for key in data:
        if key not in allowed:
            path = f"{section}.{key}" if section else key
            raise ConfigError(f"unknown key '{path}'")


def _build(section: str, cls, data: dict, required=()):
    _check_keys(section, data, _field_names(cls))
    for name in required:
        if name not in data:
            raise ConfigError(f"missing required field '{section}.{name}'")
    kwargs = {}
    for key, value in data.items():
        if key in _TUPLE_KEYS:
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section '{section}': {exc}") from exc


def _build_env(env_data: dict, reward: RewardConstants) -> EnvConfig:
    env_data = dict(env_data)
    degree_keys = {"max_spawn_tilt", "spawn_cone_half_angle"}
    allowed = (
        _field_names(EnvConfig) - {"dr", "disturbance", "reward"} - degree_keys
    ) | {"dr", "disturbance"} | {f"{k}_deg" for k in degree_keys}
    _check_keys("env", env_data, allowed)
    if "num_agents" not in env_data:
        raise ConfigError("missing required field 'env.num_agents'")
    dr = _build("env.dr", DRConfig, env_data.pop("dr", {}))
    disturbance = _build("env.disturbance", DisturbanceConfig, env_data.pop("disturbance", {}))
    for key in degree_keys:
        if f"{key}_deg" in env_data:
            env_data[key] = float(np.deg2rad(env_data.pop(f"{key}_deg")))
    for key in ("shell_radius_range",):
        if key in env_data:
            env_data[key] = tuple(env_data[key])
    try:
        return EnvConfig(dr=dr, disturbance=disturbance, reward=reward, **env_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section 'env': {exc}") from exc


@dataclass
class RunConfig:
    physics: PhysicalParams
    env: EnvConfig
    train: TrainConfig | None
    eval: EvalConfig

    def to_dict(self) -> dict:
        """Resolved snapshot of every setting (for the run manifest)."""
        env = self.env
        env_dict = {
            "num_agents": env.num_agents,
            "target_position": [float(v) for v in env.target_position],
            "episode_length": env.episode_length,
            "bounds_min": [float(v) for v in env.bounds_min],
            "bounds_max": [float(v) for v in env.bounds_max],
            "observation_noise_std": env.observation_noise_std,
            "noise_position_scale": env.noise_position_scale,
            "noise_velocity_scale": env.noise_velocity_scale,
            "noise_rotation_scale": env.noise_rotation_scale,
            "noise_body_rate_scale": env.noise_body_rate_scale,
            "noise_action_scale": env.noise_action_scale,
            "target_randomization_enabled": env.target_randomization_enabled,
            "target_update_box": env.target_update_box,
            "target_update_probability": env.target_update_probability,
            "payload_spawn_radius": env.payload_spawn_radius,
            "shell_radius_range": list(env.shell_radius_range),
            "spawn_cone_half_angle_deg": float(np.rad2deg(env.spawn_cone_half_angle)),
            "max_spawn_tilt_deg": float(np.rad2deg(env.max_spawn_tilt)),
            "max_spawn_speed": env.max_spawn_speed,
            "max_spawn_body_rate": env.max_spawn_body_rate,
            "ground_start_probability": env.ground_start_probability,
            "dr": {f.name: _plain(getattr(env.dr, f.name)) for f in fields(DRConfig)},
            "disturbance": {
                f.name: _plain(getattr(env.disturbance, f.name))
                for f in fields(DisturbanceConfig)
            },
        }
        out = {
            "physics": {k: _plain(v) for k, v in self.physics.to_dict().items()},
            "reward": {k: _plain(v) for k, v in self.env.reward.to_dict().items()},
            "env": env_dict,
            "eval": {f.name: _plain(getattr(self.eval, f.name)) for f in fields(EvalConfig)},
        }
        if self.train is not None:
            out["train"] = {f.name: _plain(getattr(self.train, f.name)) for f in fields(TrainConfig)}
        return out


def _plain(value):
    if isinstance(value, np.ndarray):
        return [float(v) for v in value]
    if isinstance(value, tuple):
        return list(value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def parse_config(data: dict, require_train: bool = False) -> RunConfig:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys("", data, {"physics", "reward", "env", "train", "eval"})

    physics_data = dict(data.get("physics", {}))
    _check_keys("physics", physics_data, _PHYSICS_KEYS)
    try:
        physics = PhysicalParams.from_dict(physics_data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section 'physics': {exc}") from exc

    reward = _build("reward", RewardConstants, data.get("reward", {}))
    env = _build_env(data.get("env", {}), reward)

    train = None
    if "train" in data:
        train = _build(
            "train", TrainConfig, data["train"], required=("total_steps", "num_envs")
        )
    elif require_train:
        raise ConfigError("missing required section 'train'")

    eval_cfg = _build("eval", EvalConfig, data.get("eval", {}))
    return RunConfig(physics=physics, env=env, train=train, eval=eval_cfg)


def load_config(path, require_train: bool = False) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
    return parse_config(data, require_train=require_train)
