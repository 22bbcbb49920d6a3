"""Decentralized multi-quadrotor payload environment.

Wraps the simulation core into a Dec-POMDP: randomized resets, per-episode
plant randomization, per-step stochastic disturbances, observation
construction with injected sensor noise, shared team reward, and
termination accounting.  Each Env instance is an independent value-state
machine driven by its own RNG stream; batches of environments are stepped
by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import quaternions as quat
from .physics import (
    PAYLOAD,
    ExternalWrench,
    MotorBank,
    PhysicalParams,
    WorldState,
    check_collision,
    default_motor_bank,
    motor_lag_step,
    step_dynamics,
)
from .rewards import RewardBreakdown, RewardConstants, reward_total

DONE_REASONS = ("collision", "out_of_bounds", "timeout", "none")


@dataclass
class DRConfig:
    """Per-episode actuator randomization."""

    thrust_base_range: tuple = (0.105, 0.15)  # per-quad base cap, N, uniform
    thrust_motor_std: float = 0.008  # per-motor offset around the base, N
    thrust_limits: tuple = (0.095, 0.16)  # hard clip on sampled caps, N
    lag_time_range: tuple = (0.004, 0.05)  # motor lag constant, s, uniform
    reset_speed_noise_std: float = 0.02  # filtered-proxy perturbation at reset
    rpm_jump_enabled: bool = True  # occasional steps in the filtered proxy
    rpm_jump_probability: float = 0.002  # per quad per step
    rpm_jump_scale: float = 0.2  # jump size as a fraction of sqrt(cap)

    def __post_init__(self):
        lo, hi = self.thrust_base_range
        clo, chi = self.thrust_limits
        if not lo <= hi:
            raise ValueError("thrust_base_range must be ordered")
        if not (clo <= lo and hi <= chi):
            raise ValueError("thrust_limits must contain thrust_base_range")
        if not self.lag_time_range[0] <= self.lag_time_range[1]:
            raise ValueError("lag_time_range must be ordered")


@dataclass
class DisturbanceConfig:
    """Bounded random wrenches injected while stepping."""

    quad_force_max: float = 0.05  # N
    quad_torque_max: float = 0.03  # N m
    payload_force_max: float = 5.0  # N
    per_step_probability: float = 0.01
    z_bias_weight: float = 2.0  # pull of the sampled direction toward body z

    def __post_init__(self):
        if not 0.0 <= self.per_step_probability <= 1.0:
            raise ValueError("per_step_probability must be in [0, 1]")
        for name in ("quad_force_max", "quad_torque_max", "payload_force_max"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class EnvConfig:
    num_agents: int = 1
    target_position: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.5]))
    episode_length: int = 3072
    bounds_min: np.ndarray = field(default_factory=lambda: np.array([-3.0, -3.0, -0.02]))
    bounds_max: np.ndarray = field(default_factory=lambda: np.array([3.0, 3.0, 4.0]))
    observation_noise_std: float = 1.0
    # per-group noise scaling (diagonal), applied as std = noise_std * scale
    noise_position_scale: float = 0.002
    noise_velocity_scale: float = 0.01
    noise_rotation_scale: float = 0.01
    noise_body_rate_scale: float = 0.05
    noise_action_scale: float = 0.0
    dr: DRConfig = field(default_factory=DRConfig)
    disturbance: DisturbanceConfig = field(default_factory=DisturbanceConfig)
    reward: RewardConstants = field(default_factory=RewardConstants)
    target_randomization_enabled: bool = False
    target_update_box: float = 0.5  # m, half-width around the nominal goal
    target_update_probability: float = 0.002  # per step
    # reset distribution
    payload_spawn_radius: float = 1.0  # m, ball around the target
    shell_radius_range: tuple = (0.5, 1.0)  # quad distance as a fraction of cable length
    spawn_cone_half_angle: float = np.pi  # rad, quad direction cone around +z (pi = full sphere)
    max_spawn_tilt: float = np.deg2rad(60.0)  # rad
    max_spawn_speed: float = 1.0  # m/s
    max_spawn_body_rate: float = 2.0  # rad/s
    ground_start_probability: float = 0.2

    def __post_init__(self):
        self.target_position = np.asarray(self.target_position, dtype=float)
        self.bounds_min = np.asarray(self.bounds_min, dtype=float)
        self.bounds_max = np.asarray(self.bounds_max, dtype=float)
        if self.num_agents < 1:
            raise ValueError("num_agents must be >= 1")
        if self.observation_noise_std < 0:
            raise ValueError("observation_noise_std must be >= 0")
        if np.any(self.bounds_min >= self.bounds_max):
            raise ValueError("bounds_min must be strictly below bounds_max")


@dataclass
class StepResult:
    per_agent_obs: np.ndarray  # (Q, obs_dim)
    shared_reward: float
    reward_breakdown: RewardBreakdown
    done: bool
    done_reason: str  # one of DONE_REASONS
    world: WorldState
    f_cmd: np.ndarray  # (Q, 4), commanded thrusts, N
    f_applied: np.ndarray  # (Q, 4), post-lag applied thrusts, N


def agent_obs_dim(num_agents: int) -> int:
    """Own block (28) plus one relative position per teammate."""
    return 28 + 3 * (num_agents - 1)


def global_obs_dim(num_agents: int) -> int:
    return 6 + 22 * num_agents


def map_action(a: np.ndarray, f_max: np.ndarray) -> np.ndarray:
    """Normalized action in [-1, 1] to commanded thrust in [0, f_max]."""
    a = np.clip(np.asarray(a, dtype=float), -1.0, 1.0)
    return 0.5 * (a + 1.0) * f_max


def sample_domain_randomization(
    rng: np.random.Generator, dr: DRConfig, num_quads: int
) -> tuple[np.ndarray, np.ndarray]:
    """Draw per-motor thrust caps and per-quad lag constants.

    Caps are a per-quad base with independent per-motor offsets, clipped to
    the hard limits.
    """
    base = rng.uniform(*dr.thrust_base_range, size=(num_quads, 1))
    offset = rng.normal(0.0, dr.thrust_motor_std, size=(num_quads, 4))
    f_max = np.clip(base + offset, *dr.thrust_limits)
    tau = rng.uniform(*dr.lag_time_range, size=num_quads)
    return f_max, tau


def _random_unit(rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal(3)
    n = np.linalg.norm(v)
    if n < 1e-12:
        return np.array([0.0, 0.0, 1.0])
    return v / n


def _random_cone_direction(rng: np.random.Generator, half_angle: float) -> np.ndarray:
    """Uniform direction within a cone of the given half-angle around +z."""
    cos_theta = rng.uniform(np.cos(min(half_angle, np.pi)), 1.0)
    sin_theta = np.sqrt(max(1.0 - cos_theta * cos_theta, 0.0))
    azimuth = rng.uniform(0.0, 2.0 * np.pi)
    return np.array([sin_theta * np.cos(azimuth), sin_theta * np.sin(azimuth), cos_theta])


def _uniform_ball(rng: np.random.Generator, radius: float) -> np.ndarray:
    return _random_unit(rng) * radius * rng.random() ** (1.0 / 3.0)


def _random_attitude(rng: np.random.Generator, max_tilt: float) -> np.ndarray:
    yaw = quat.from_axis_angle(np.array([0.0, 0.0, 1.0]), rng.uniform(0.0, 2.0 * np.pi))
    axis_angle = rng.uniform(0.0, 2.0 * np.pi)
    axis = np.array([np.cos(axis_angle), np.sin(axis_angle), 0.0])
    tilt = quat.from_axis_angle(axis, rng.uniform(0.0, max_tilt))
    return quat.multiply(tilt, yaw)


def _nominal_formation(
    payload_pos: np.ndarray, num_quads: int, cable_length: float
) -> np.ndarray:
    """Fallback symmetric placement on a 45-degree cone above the payload."""
    radius = 0.8 * cable_length
    angles = 2.0 * np.pi * np.arange(num_quads) / num_quads
    horizontal = radius * np.cos(np.pi / 4.0)
    vertical = radius * np.sin(np.pi / 4.0)
    return payload_pos + np.stack(
        [horizontal * np.cos(angles), horizontal * np.sin(angles), np.full(num_quads, vertical)],
        axis=-1,
    )


def _sample_initial_state(
    rng: np.random.Generator, config: EnvConfig, params: PhysicalParams
) -> tuple[WorldState, bool]:
    """Randomized reset; returns (world, is_ground_start).

    Quads sit on a spherical shell around the payload, never past cable
    length, rejection-sampled for spacing; ground starts put everything on
    the floor with slack cables and zero velocity.
    """
    num_quads = config.num_agents
    d_min = config.reward.collision_distance
    separation = 1.05 * d_min  # small margin over the collision threshold
    target = config.target_position

    grounded = rng.random() < config.ground_start_probability
    if grounded:
        xy = target[:2] + _uniform_ball(rng, config.payload_spawn_radius)[:2]
        payload_pos = np.array([xy[0], xy[1], params.payload_radius])
        dz = params.quad_collision_radius - params.payload_radius
        h_max = np.sqrt(max(params.cable_length**2 - dz**2, 0.0))
        quad_pos = np.zeros((num_quads, 3))
        placed = 0
        for _ in range(100):
            angle = rng.uniform(0.0, 2.0 * np.pi)
            h = rng.uniform(0.3, 0.8) * h_max
            candidate = np.array(
                [
                    payload_pos[0] + h * np.cos(angle),
                    payload_pos[1] + h * np.sin(angle),
                    params.quad_collision_radius,
                ]
            )
            if placed and np.min(
                np.linalg.norm(quad_pos[:placed] - candidate, axis=-1)
            ) < separation:
                continue
            quad_pos[placed] = candidate
            placed += 1
            if placed == num_quads:
                break
        if placed < num_quads:
            quad_pos = _nominal_formation(payload_pos, num_quads, params.cable_length)
            quad_pos[:, 2] = params.quad_collision_radius
        quad_quat = np.tile(quat.identity(), (num_quads, 1))
        quad_vel = np.zeros((num_quads, 3))
        quad_omega = np.zeros((num_quads, 3))
        payload_vel = np.zeros(3)
    else:
        payload_pos = target + _uniform_ball(rng, config.payload_spawn_radius)
        payload_pos[2] = np.clip(payload_pos[2], 0.05, config.bounds_max[2] - 0.1)
        lo, hi = config.shell_radius_range
        quad_pos = np.zeros((num_quads, 3))
        placed = 0
        for _ in range(100):
            direction = _random_cone_direction(rng, config.spawn_cone_half_angle)
            radius = rng.uniform(lo, hi) * params.cable_length
            candidate = payload_pos + radius * direction
            if candidate[2] < params.quad_collision_radius:
                continue
            if placed and np.min(
                np.linalg.norm(quad_pos[:placed] - candidate, axis=-1)
            ) < separation:
                continue
            quad_pos[placed] = candidate
            placed += 1
            if placed == num_quads:
                break
        if placed < num_quads:
            quad_pos = _nominal_formation(payload_pos, num_quads, params.cable_length)
        quad_quat = np.stack(
            [_random_attitude(rng, config.max_spawn_tilt) for _ in range(num_quads)]
        )
        quad_vel = np.stack(
            [_uniform_ball(rng, config.max_spawn_speed) for _ in range(num_quads)]
        )
        quad_omega = np.stack(
            [_uniform_ball(rng, config.max_spawn_body_rate) for _ in range(num_quads)]
        )
        payload_vel = _uniform_ball(rng, config.max_spawn_speed)

    world = WorldState(
        quad_pos=quad_pos,
        quad_quat=quad_quat,
        quad_vel=quad_vel,
        quad_omega=quad_omega,
        payload_pos=payload_pos,
        payload_vel=payload_vel,
        motors=default_motor_bank(num_quads, params),
        time=0.0,
        step_count=0,
    )
    if grounded:
        world.motors.filtered_speed_proxy[:] = 0.0
    return world, grounded


def sample_initial_state(
    rng: np.random.Generator, config: EnvConfig, params: PhysicalParams
) -> WorldState:
    world, _ = _sample_initial_state(rng, config, params)
    return world


def build_agent_observation(
    i: int, world: WorldState, target: np.ndarray, prev_actions: np.ndarray
) -> np.ndarray:
    """Local observation of agent i.

    Layout: payload error (3), payload velocity (3), own offset from payload
    (3), own rotation matrix column-stacked (9), own velocity (3), own body
    rates (3), own previous action (4), then teammate offsets in ascending
    agent index (3 each).
    """
    e_p = np.asarray(target, dtype=float) - world.payload_pos
    deltas = world.quad_pos - world.payload_pos
    vec_r = quat.to_matrix(world.quad_quat[i]).T.reshape(9)
    parts = [
        e_p,
        world.payload_vel,
        deltas[i],
        vec_r,
        world.quad_vel[i],
        world.quad_omega[i],
        prev_actions[i],
    ]
    parts.extend(deltas[j] for j in range(world.num_quads) if j != i)
    return np.concatenate(parts)


def build_global_observation(
    world: WorldState, target: np.ndarray, prev_actions: np.ndarray
) -> np.ndarray:
    """Flat global observation: payload block, then one block per agent."""
    e_p = np.asarray(target, dtype=float) - world.payload_pos
    deltas = world.quad_pos - world.payload_pos
    parts = [e_p, world.payload_vel]
    for i in range(world.num_quads):
        parts.extend(
            [
                deltas[i],
                quat.to_matrix(world.quad_quat[i]).T.reshape(9),
                world.quad_vel[i],
                world.quad_omega[i],
                prev_actions[i],
            ]
        )
    return np.concatenate(parts)


def noise_scale_vector(config: EnvConfig, num_agents: int) -> np.ndarray:
    """Per-component noise scaling for the agent observation layout."""
    pos = [config.noise_position_scale] * 3
    vel = [config.noise_velocity_scale] * 3
    rot = [config.noise_rotation_scale] * 9
    rate = [config.noise_body_rate_scale] * 3
    act = [config.noise_action_scale] * 4
    peers = [config.noise_position_scale] * (3 * (num_agents - 1))
    return np.array(pos + vel + pos + rot + vel + rate + act + peers)


def add_observation_noise(
    obs: np.ndarray, noise_std: float, scale: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """obs + noise_std * scale * eta with eta standard normal per component."""
    obs = np.asarray(obs, dtype=float)
    if noise_std == 0.0:
        return obs.copy()
    return obs + noise_std * scale * rng.standard_normal(obs.shape)


def _biased_direction(
    rng: np.random.Generator, bias_axis: np.ndarray, weight: float
) -> np.ndarray:
    v = _random_unit(rng) + weight * bias_axis
    n = np.linalg.norm(v)
    if n < 1e-12:
        return bias_axis
    return v / n


def apply_random_disturbances(
    rng: np.random.Generator, config: DisturbanceConfig, world: WorldState
) -> list[ExternalWrench]:
    """Sample this step's external wrenches (possibly none).

    With the configured probability one random quad takes a small force and
    torque, both direction-biased toward its body z axis; independently the
    payload takes a larger impulse force in a uniform direction.
    """
    wrenches: list[ExternalWrench] = []
    p = config.per_step_probability
    if p > 0.0 and rng.random() < p:
        i = int(rng.integers(world.num_quads))
        body_z = quat.rotate(world.quad_quat[i], np.array([0.0, 0.0, 1.0]))
        force = rng.uniform(0.0, config.quad_force_max) * _biased_direction(
            rng, body_z, config.z_bias_weight
        )
        torque = rng.uniform(0.0, config.quad_torque_max) * _biased_direction(
            rng, np.array([0.0, 0.0, 1.0]), config.z_bias_weight
        )
        wrenches.append(ExternalWrench(force=force, torque=torque, target=i))
    if p > 0.0 and rng.random() < p:
        force = rng.uniform(0.0, config.payload_force_max) * _random_unit(rng)
        wrenches.append(ExternalWrench(force=force, torque=np.zeros(3), target=PAYLOAD))
    return wrenches


def sample_target_update(
    rng: np.random.Generator, target: np.ndarray, config: EnvConfig
) -> np.ndarray:
    """Occasionally move the target within a box around the nominal goal."""
    if not config.target_randomization_enabled:
        return target
    if rng.random() < config.target_update_probability:
        box = config.target_update_box
        return config.target_position + rng.uniform(-box, box, size=3)
    return target


def out_of_bounds(world: WorldState, config: EnvConfig) -> bool:
    points = np.vstack([world.quad_pos, world.payload_pos])
    return bool(
        np.any(points < config.bounds_min) or np.any(points > config.bounds_max)
    )


def check_termination(
    world: WorldState, config: EnvConfig, collided: bool
) -> tuple[bool, str]:
    if collided:
        return True, "collision"
    if out_of_bounds(world, config):
        return True, "out_of_bounds"
    if world.step_count >= config.episode_length:
        return True, "timeout"
    return False, "none"


def _apply_rpm_jumps(
    rng: np.random.Generator, dr: DRConfig, motors: MotorBank
) -> MotorBank:
    """Occasional bounded steps in the filtered speed proxy."""
    nu = motors.filtered_speed_proxy
    cap = np.sqrt(motors.thrust_cap)
    changed = False
    for i in range(nu.shape[0]):
        if rng.random() < dr.rpm_jump_probability:
            if not changed:
                nu = nu.copy()
                changed = True
            jump = rng.uniform(-dr.rpm_jump_scale, dr.rpm_jump_scale, size=4) * cap[i]
            nu[i] = np.clip(nu[i] + jump, 0.0, cap[i])
    if not changed:
        return motors
    return replace(motors, filtered_speed_proxy=nu)


class Env:
    """Single environment instance with its own RNG stream."""

    def __init__(
        self,
        config: EnvConfig,
        params: PhysicalParams,
        rng: np.random.Generator,
    ):
        self.config = config
        self.params = params
        self.rng = rng
        self.world: WorldState | None = None
        self.target = config.target_position.copy()
        self.prev_action = np.zeros((config.num_agents, 4))
        self._done = True
        self._noise_scale = noise_scale_vector(config, config.num_agents)

    @property
    def obs_dim(self) -> int:
        return agent_obs_dim(self.config.num_agents)

    def _observations(self) -> np.ndarray:
        obs = np.stack(
            [
                build_agent_observation(i, self.world, self.target, self.prev_action)
                for i in range(self.config.num_agents)
            ]
        )
        if self.config.observation_noise_std > 0.0:
            for i in range(obs.shape[0]):
                obs[i] = add_observation_noise(
                    obs[i], self.config.observation_noise_std, self._noise_scale, self.rng
                )
        return obs

    def reset(self) -> tuple[WorldState, np.ndarray]:
        """Start a new episode; returns (world, per-agent observations)."""
        config, params = self.config, self.params
        f_max, tau = sample_domain_randomization(self.rng, config.dr, config.num_agents)
        world, grounded = _sample_initial_state(self.rng, config, params)
        hover = params.hover_thrust_per_motor()
        if grounded:
            nu = np.zeros((config.num_agents, 4))
        else:
            nu = np.full((config.num_agents, 4), np.sqrt(hover))
            nu = nu + self.rng.normal(
                0.0, config.dr.reset_speed_noise_std, size=nu.shape
            )
            nu = np.clip(nu, 0.0, np.sqrt(f_max))
        world = replace(
            world,
            motors=MotorBank(
                filtered_speed_proxy=nu, thrust_cap=f_max, lag_time_constant=tau
            ),
        )
        self.world = world
        self.target = config.target_position.copy()
        # hover-equivalent previous action given this episode's thrust caps
        self.prev_action = np.clip(2.0 * hover / f_max - 1.0, -1.0, 1.0)
        self._done = False
        return world, self._observations()

    def step(self, actions: np.ndarray) -> StepResult:
        """Advance one control step (= one physics step).

        RNG draw order is fixed: target update, rpm jumps, disturbances,
        observation noise.
        """
        if self._done or self.world is None:
            raise RuntimeError("step() called on a terminal episode; call reset() first")
        config, params = self.config, self.params
        actions = np.clip(np.asarray(actions, dtype=float), -1.0, 1.0)

        self.target = sample_target_update(self.rng, self.target, config)
        f_cmd = map_action(actions, self.world.motors.thrust_cap)
        motors, f_applied = motor_lag_step(self.world.motors, f_cmd, params.dt)
        if config.dr.rpm_jump_enabled:
            motors = _apply_rpm_jumps(self.rng, config.dr, motors)
        wrenches = apply_random_disturbances(self.rng, config.disturbance, self.world)
        world = step_dynamics(
            replace(self.world, motors=motors), f_applied, wrenches, params
        )

        collided = check_collision(world, config.reward.collision_distance, params)
        oob = out_of_bounds(world, config)
        done, reason = check_termination(world, config, collided)
        total, breakdown = reward_total(
            world,
            self.target,
            actions,
            self.prev_action,
            collided,
            oob,
            config.reward,
            params.cable_length,
        )

        self.world = world
        self.prev_action = actions
        self._done = done
        obs = self._observations()
        return StepResult(
            per_agent_obs=obs,
            shared_reward=float(total),
            reward_breakdown=RewardBreakdown(
                **{name: float(value) for name, value in breakdown.as_dict().items()}
            ),
            done=done,
            done_reason=reason,
            world=world,
            f_cmd=f_cmd,
            f_applied=f_applied,
        )
