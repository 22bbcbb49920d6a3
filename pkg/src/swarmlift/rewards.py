"""Shared team reward: tracking * stability + safety.

The tracking factor pays for small payload error and velocity pointed at the
target; the stability factor caps speeds softly, keeps bodies upright and
yaw-quiet, and keeps cables engaged; the safety term penalizes collisions,
leaving the arena, ragged commands, and motor saturation while paying for
inter-quad spacing.  Multiplying tracking by stability only rewards speed
when the load is under control; safety is additive so its incentives hold
everywhere.

All functions broadcast over leading batch axes (states stacked along the
front), which the statistical bound checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .physics import WorldState


@dataclass
class RewardConstants:
    """Weights and scales of the composite reward."""

    shaping_sharpness: float = 2.0  # exponent scale of the exp(-s|x|) envelope
    speed_gate_floor: float = 0.02  # keeps the allowed-speed gate above zero at the target
    align_sharpness_gain: float = 40.0  # direction-term sharpness per meter of error
    align_sharpness_cap: float = 2.0  # ceiling on direction-term sharpness
    speed_wall_exponent: float = 8.0  # soft-wall exponent of the velocity caps
    payload_speed_fraction: float = 0.75  # payload speed allowance relative to quads
    collision_penalty: float = 10.0
    out_of_bounds_penalty: float = 10.0
    saturation_barrier_gain: float = 50.0  # steepness of the command-saturation barrier
    collision_distance: float = 0.15  # m, inter-quad distance counted as a collision
    safe_distance: float = 0.18  # m, inter-quad distance with full spacing credit
    yaw_weight: float = 10.0
    upright_weight: float = 5.0
    smoothness_weight: float = 10.0
    max_speed: float = 1.5  # m/s
    direction_epsilon: float = 1e-6

    def __post_init__(self):
        if not self.safe_distance > self.collision_distance > 0:
            raise ValueError("need safe_distance > collision_distance > 0")
        if self.max_speed <= 0:
            raise ValueError("max_speed must be positive")

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: dict) -> "RewardConstants":
        return cls(**data)


@dataclass
class RewardBreakdown:
    """Every sub-term plus the composite total.

    Fields are scalars for a single state or arrays for batched states.
    """

    r_pos: float
    r_dir: float
    r_track: float
    r_velP: float
    r_velQ: float
    r_yaw: float
    r_up: float
    r_taut: float
    r_stable: float
    r_dist: float
    r_coll: float
    r_oob: float
    r_smooth: float
    r_energy: float
    r_safe: float
    total: float

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @staticmethod
    def field_names() -> list[str]:
        return [f.name for f in fields(RewardBreakdown)]


def shaping_phi(s, x):
    """Bounded envelope exp(-s * |x|), equal to 1 at x = 0."""
    return np.exp(-np.asarray(s, dtype=float) * np.abs(x))


def distance_gate(d, floor):
    """Allowed-speed gate min(3 d, 1) + floor; shrinks near the target."""
    return np.minimum(3.0 * np.asarray(d, dtype=float), 1.0) + floor


def reward_track(e_p: np.ndarray, v_p: np.ndarray, k: RewardConstants):
    """Tracking factor: mean of position shaping and velocity-direction alignment."""
    e_p = np.asarray(e_p, dtype=float)
    v_p = np.asarray(v_p, dtype=float)
    err = np.linalg.norm(e_p, axis=-1)
    r_pos = shaping_phi(k.shaping_sharpness, err)
    v_dir = v_p / (np.linalg.norm(v_p, axis=-1, keepdims=True) + k.direction_epsilon)
    e_dir = e_p / (err[..., None] + k.direction_epsilon)
    s_align = np.minimum(k.align_sharpness_gain * err, k.align_sharpness_cap)
    r_dir = shaping_phi(s_align, 1.0 - np.sum(v_dir * e_dir, axis=-1))
    return 0.5 * (r_pos + r_dir), r_pos, r_dir


def reward_stable(world: WorldState, e_p: np.ndarray, k: RewardConstants, cable_length: float):
    """Stability factor: soft speed walls, upright/yaw shaping, taut cables.

    Returns (r_stable, r_velP, r_velQ, r_yaw, r_up, r_taut).
    """
    d = np.linalg.norm(np.asarray(e_p, dtype=float), axis=-1)
    gate = distance_gate(d, k.speed_gate_floor)

    payload_speed = np.linalg.norm(world.payload_vel, axis=-1)
    r_velP = np.exp(
        -((payload_speed / (k.payload_speed_fraction * k.max_speed * gate)) ** k.speed_wall_exponent)
    )
    quad_speed = np.linalg.norm(world.quad_vel, axis=-1)
    r_velQ = np.mean(
        np.exp(-((quad_speed / (k.max_speed * gate[..., None])) ** k.speed_wall_exponent)),
        axis=-1,
    )
    r_yaw = np.mean(shaping_phi(k.shaping_sharpness, world.quad_omega[..., 2]), axis=-1)
    cos_tilt = np.clip(world.body_z_world()[..., 2], -1.0, 1.0)
    r_up = np.mean(shaping_phi(k.shaping_sharpness, np.arccos(cos_tilt)), axis=-1)
    rel = world.quad_pos - world.payload_pos[..., None, :]
    r_taut = (
        np.mean(np.linalg.norm(rel, axis=-1), axis=-1) + np.mean(rel[..., 2], axis=-1)
    ) / cable_length
    r_stable = (
        r_velP + r_velQ + k.yaw_weight * r_yaw + k.upright_weight * r_up + r_taut
    ) / 5.0
    return r_stable, r_velP, r_velQ, r_yaw, r_up, r_taut


def reward_safe(
    world: WorldState,
    actions: np.ndarray,
    prev_actions: np.ndarray,
    collided,
    out_of_bounds,
    k: RewardConstants,
):
    """Safety term: spacing credit minus collision, bounds, roughness, saturation.

    Smoothness runs on the raw actions in [-1, 1]; the saturation barrier runs
    on the normalized command u = (a + 1)/2 so its walls sit at motor-off and
    motor-full.  Returns (r_safe, r_dist, r_coll, r_oob, r_smooth, r_energy).
    """
    actions = np.asarray(actions, dtype=float)
    prev_actions = np.asarray(prev_actions, dtype=float)
    num_quads = world.quad_pos.shape[-2]

    if num_quads == 1:
        r_dist = np.ones(world.quad_pos.shape[:-2])
    else:
        gaps = []
        for i in range(num_quads):
            for j in range(i + 1, num_quads):
                sep = np.linalg.norm(
                    world.quad_pos[..., i, :] - world.quad_pos[..., j, :], axis=-1
                )
                gaps.append(
                    np.clip(
                        (sep - k.collision_distance) / (k.safe_distance - k.collision_distance),
                        0.0,
                        1.0,
                    )
                )
        r_dist = np.mean(gaps, axis=0)

    r_coll = k.collision_penalty * np.asarray(collided, dtype=float)
    r_oob = k.out_of_bounds_penalty * np.asarray(out_of_bounds, dtype=float)

    step_change = np.abs(actions - prev_actions).sum(axis=-1)
    motor_mean = actions.mean(axis=-1, keepdims=True)
    imbalance = np.abs(actions - motor_mean).sum(axis=-1)
    r_smooth = 0.5 * (step_change.mean(axis=-1) + imbalance.mean(axis=-1))

    u = 0.5 * (actions + 1.0)
    barrier = np.exp(-k.saturation_barrier_gain * np.abs(u)) + np.exp(
        k.saturation_barrier_gain * (u - 1.0)
    )
    r_energy = barrier.mean(axis=(-2, -1))

    r_safe = (-r_coll - r_oob - k.smoothness_weight * r_smooth - r_energy + r_dist) / 5.0
    return r_safe, r_dist, r_coll, r_oob, r_smooth, r_energy


def reward_total(
    world: WorldState,
    target: np.ndarray,
    actions: np.ndarray,
    prev_actions: np.ndarray,
    collided,
    out_of_bounds,
    k: RewardConstants,
    cable_length: float,
):
    """Composite reward r_track * r_stable + r_safe with a full breakdown."""
    e_p = np.asarray(target, dtype=float) - world.payload_pos
    r_track, r_pos, r_dir = reward_track(e_p, world.payload_vel, k)
    r_stable, r_velP, r_velQ, r_yaw, r_up, r_taut = reward_stable(
        world, e_p, k, cable_length
    )
    r_safe, r_dist, r_coll, r_oob, r_smooth, r_energy = reward_safe(
        world, actions, prev_actions, collided, out_of_bounds, k
    )
    total = r_track * r_stable + r_safe
    breakdown = RewardBreakdown(
        r_pos=r_pos,
        r_dir=r_dir,
        r_track=r_track,
        r_velP=r_velP,
        r_velQ=r_velQ,
        r_yaw=r_yaw,
        r_up=r_up,
        r_taut=r_taut,
        r_stable=r_stable,
        r_dist=r_dist,
        r_coll=r_coll,
        r_oob=r_oob,
        r_smooth=r_smooth,
        r_energy=r_energy,
        r_safe=r_safe,
        total=total,
    )
    if not np.all(np.isfinite(np.asarray(total))):
        for name, value in breakdown.as_dict().items():
            if not np.all(np.isfinite(np.asarray(value))):
                raise FloatingPointError(f"non-finite reward term {name}")
    return total, breakdown
