"""Deterministic evaluation: episode rollouts, recovery metrics, reference
tracking, and generalization sweeps.

Evaluation always acts with the policy mean.  Observation noise and target
randomization are off unless explicitly re-enabled, so a (checkpoint, seed)
pair maps to exactly one trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .env import Env, EnvConfig
from .nets import PolicyParams, actor_forward
from .physics import PhysicalParams
from .rewards import RewardBreakdown

SWEEP_AXES = ("cable_length", "payload_mass", "obs_noise", "seed")


@dataclass
class ReferenceTrajectory:
    """Figure-eight (Gerono lemniscate) target generator in a horizontal plane."""

    center: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.5]))
    amp_x: float = 0.5  # m
    amp_y: float = 0.25  # m
    period: float = 8.0  # s

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.period <= 0:
            raise ValueError("period must be positive")


def figure_eight_target(t, ref: ReferenceTrajectory) -> np.ndarray:
    """Target position at time t (seconds); broadcasts over arrays of t."""
    t = np.asarray(t, dtype=float)
    phase = 2.0 * np.pi * t / ref.period
    offset = np.stack(
        [
            ref.amp_x * np.sin(phase),
            0.5 * ref.amp_y * np.sin(2.0 * phase),
            np.zeros_like(t),
        ],
        axis=-1,
    )
    return ref.center + offset


@dataclass
class EvalConfig:
    """Harness settings (thresholds are config-exposed, not baked in)."""

    success_radius: float = 0.10  # m, payload-to-target distance that counts as recovered
    hold_seconds: float = 1.0  # continuous time inside the radius required
    timeout_seconds: float = 10.0  # recovery budget
    trials: int = 100
    noisy: bool = False  # re-enable observation noise during evaluation
    fig8_amp_x: float = 0.5
    fig8_amp_y: float = 0.25
    fig8_period: float = 8.0


@dataclass
class EpisodeRecord:
    """Everything recorded along one rollout.

    State arrays have S+1 entries (initial state plus one per step); action,
    thrust, and reward arrays have S entries.
    """

    times: np.ndarray
    payload_pos: np.ndarray
    payload_vel: np.ndarray
    quad_pos: np.ndarray
    quad_quat: np.ndarray
    quad_vel: np.ndarray
    quad_omega: np.ndarray
    targets: np.ndarray
    actions: np.ndarray
    f_cmd: np.ndarray
    f_applied: np.ndarray
    rewards: np.ndarray
    breakdowns: dict
    done_reason: str
    success: bool = False

    @property
    def steps(self) -> int:
        return self.actions.shape[0]

    @property
    def mean_payload_speed(self) -> float:
        return float(np.mean(np.linalg.norm(self.payload_vel, axis=-1)))


def run_episode(
    params: PolicyParams,
    env_config: EnvConfig,
    phys: PhysicalParams,
    seed,
    reference: ReferenceTrajectory | None = None,
    noisy: bool = False,
    max_steps: int | None = None,
) -> EpisodeRecord:
    """Deterministic rollout with mean actions.

    With a reference trajectory the target moves along the figure eight;
    otherwise it stays at the configured goal.  Stops on termination or
    after max_steps (defaults to the episode length).
    """
    eval_config = replace(
        env_config,
        observation_noise_std=env_config.observation_noise_std if noisy else 0.0,
        target_randomization_enabled=False,
    )
    env = Env(eval_config, phys, np.random.default_rng(seed))
    world, obs = env.reset()
    if obs.shape[-1] != params.obs_dim:
        raise ValueError(
            f"policy expects obs_dim {params.obs_dim} but environment produces "
            f"{obs.shape[-1]} (num_agents={env_config.num_agents})"
        )
    horizon = env_config.episode_length if max_steps is None else int(max_steps)

    times = [world.time]
    payload_pos = [world.payload_pos.copy()]
    payload_vel = [world.payload_vel.copy()]
    quad_pos = [world.quad_pos.copy()]
    quad_quat = [world.quad_quat.copy()]
    quad_vel = [world.quad_vel.copy()]
    quad_omega = [world.quad_omega.copy()]
    targets = [env.target.copy()]
    actions, f_cmd, f_applied, rewards = [], [], [], []
    breakdowns: dict[str, list] = {name: [] for name in RewardBreakdown.field_names()}
    reason = "none"

    for _ in range(horizon):
        if reference is not None:
            env.target = figure_eight_target(env.world.time, reference)
        mean = actor_forward(params, obs)
        result = env.step(mean)
        obs = result.per_agent_obs
        world = result.world
        times.append(world.time)
        payload_pos.append(world.payload_pos.copy())
        payload_vel.append(world.payload_vel.copy())
        quad_pos.append(world.quad_pos.copy())
        quad_quat.append(world.quad_quat.copy())
        quad_vel.append(world.quad_vel.copy())
        quad_omega.append(world.quad_omega.copy())
        targets.append(np.asarray(env.target, dtype=float).copy())
        actions.append(np.clip(mean, -1.0, 1.0))
        f_cmd.append(result.f_cmd)
        f_applied.append(result.f_applied)
        rewards.append(result.shared_reward)
        for name, value in result.reward_breakdown.as_dict().items():
            breakdowns[name].append(value)
        if result.done:
            reason = result.done_reason
            break

    return EpisodeRecord(
        times=np.array(times),
        payload_pos=np.array(payload_pos),
        payload_vel=np.array(payload_vel),
        quad_pos=np.array(quad_pos),
        quad_quat=np.array(quad_quat),
        quad_vel=np.array(quad_vel),
        quad_omega=np.array(quad_omega),
        targets=np.array(targets),
        actions=np.array(actions),
        f_cmd=np.array(f_cmd),
        f_applied=np.array(f_applied),
        rewards=np.array(rewards),
        breakdowns={name: np.array(vals) for name, vals in breakdowns.items()},
        done_reason=reason,
    )


def _first_hold_index(within: np.ndarray, hold_steps: int) -> int | None:
    """Index at which `hold_steps` consecutive in-radius samples complete."""
    run = 0
    for i, ok in enumerate(within):
        run = run + 1 if ok else 0
        if run >= hold_steps:
            return i
    return None


def recovery_rate(
    params: PolicyParams,
    env_config: EnvConfig,
    phys: PhysicalParams,
    n_trials: int,
    seed: int = 0,
    timeout_s: float = 10.0,
    success_radius: float = 0.10,
    hold_s: float = 1.0,
    noisy: bool = False,
) -> tuple[float, float, list]:
    """Fraction of randomized episodes that reach and hold the target region.

    A trial succeeds when the payload stays within success_radius of the
    target for hold_s continuously inside the timeout and the episode does
    not end in a collision.  Mean speed is the payload speed averaged up to
    the recovery moment (whole episode for failures), then over trials.
    Returns (rate, mean_speed, per-trial rows).
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    max_steps = int(round(timeout_s / phys.dt))
    hold_steps = max(1, int(round(hold_s / phys.dt)))
    seeds = np.random.SeedSequence(seed).spawn(n_trials)
    rows = []
    successes = 0
    speeds = []
    for trial, trial_seed in enumerate(seeds):
        record = run_episode(
            params, env_config, phys, trial_seed, noisy=noisy, max_steps=max_steps
        )
        dist = np.linalg.norm(record.payload_pos - record.targets, axis=-1)
        hold_end = _first_hold_index(dist <= success_radius, hold_steps)
        success = hold_end is not None and record.done_reason != "collision"
        record.success = success
        end = hold_end + 1 if success else len(dist)
        speed = float(np.mean(np.linalg.norm(record.payload_vel[:end], axis=-1)))
        speeds.append(speed)
        successes += int(success)
        rows.append(
            {
                "trial": trial,
                "success": int(success),
                "recovery_time_s": float(record.times[hold_end]) if success else math.nan,
                "mean_speed": speed,
                "final_distance_m": float(dist[-1]),
                "done_reason": record.done_reason,
            }
        )
    return successes / n_trials, float(np.mean(speeds)), rows


def tracking_error(record: EpisodeRecord, ref: ReferenceTrajectory) -> tuple[float, float]:
    """(RMSE, max) payload distance from the reference over the episode."""
    targets = figure_eight_target(record.times, ref)
    err = np.linalg.norm(record.payload_pos - targets, axis=-1)
    return float(np.sqrt(np.mean(err**2))), float(np.max(err))


def generalization_sweep(
    params: PolicyParams,
    env_config: EnvConfig,
    phys: PhysicalParams,
    axis: str,
    values,
    n_trials: int,
    seed: int = 0,
    timeout_s: float = 10.0,
    success_radius: float = 0.10,
    hold_s: float = 1.0,
) -> list:
    """Recovery rate as a function of one environment parameter.

    Each value changes only that parameter from the supplied defaults.
    Returns one row dict per value.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"unknown sweep axis '{axis}'; valid axes: {', '.join(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    if axis in ("cable_length", "payload_mass"):
        for v in values:
            if v <= 0:
                raise ValueError(f"{axis} must be positive, got {v}")
    rows = []
    for value in values:
        sweep_phys = phys
        sweep_env = env_config
        sweep_seed = seed
        noisy = False
        if axis == "cable_length":
            sweep_phys = replace(phys, cable_length=float(value))
        elif axis == "payload_mass":
            sweep_phys = replace(phys, payload_mass=float(value))
        elif axis == "obs_noise":
            sweep_env = replace(env_config, observation_noise_std=float(value))
            noisy = True
        elif axis == "seed":
            sweep_seed = int(value)
        rate, mean_speed, _ = recovery_rate(
            params,
            sweep_env,
            sweep_phys,
            n_trials,
            seed=sweep_seed,
            timeout_s=timeout_s,
            success_radius=success_radius,
            hold_s=hold_s,
            noisy=noisy,
        )
        rows.append(
            {
                "axis": axis,
                "value": value,
                "rate": rate,
                "mean_speed": mean_speed,
                "n": n_trials,
            }
        )
    return rows
