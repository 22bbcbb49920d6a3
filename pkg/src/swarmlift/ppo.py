"""Independent PPO with parameter sharing.

One actor and one critic are trained on transitions pooled from every agent;
execution stays decentralized because each agent only ever sees its own
observation.  Advantages come from generalized advantage estimation, the
surrogate is clipped, and the optimizer is first-order with bias-corrected
moment estimates.  Everything is deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import Env, EnvConfig
from .nets import (
    PolicyParams,
    actor_forward,
    critic_forward,
    gaussian_entropy,
    init_policy,
    mlp_forward,
    mlp_backward,
    sample_and_logprob,
)
from .physics import PhysicalParams
from .rewards import RewardBreakdown

LOG_2PI = float(np.log(2.0 * np.pi))


class TrainingFault(RuntimeError):
    """Raised when an update produces a non-finite loss or a rollout fails."""


@dataclass
class TrainConfig:
    total_steps: int
    num_envs: int
    rollout_steps: int = 128
    learning_rate: float = 4e-4
    clip_range: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    grad_norm_clip: float = 0.5
    gamma: float = 0.997
    gae_lambda: float = 0.95
    minibatches: int = 256
    epochs: int = 8
    seed: int = 0
    checkpoint_interval: int = 50  # updates between periodic checkpoints
    advantage_normalization: bool = True
    log_std_init: float = 0.0  # initial policy log std (shared across motors)

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError("gae_lambda must be in [0, 1]")
        for name in ("total_steps", "num_envs", "rollout_steps", "minibatches", "epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


def compute_gae(rewards, values, dones, bootstrap, gamma: float, lam: float):
    """Generalized advantage estimation over the leading time axis.

    rewards and dones broadcast against values (shared rewards replicate
    across agents); bootstrap values continue truncated episodes.  Returns
    (advantages, returns).
    """
    values = np.asarray(values, dtype=float)
    steps = values.shape[0]
    rewards = np.broadcast_to(np.asarray(rewards, dtype=float), values.shape)
    nonterminal = 1.0 - np.broadcast_to(np.asarray(dones, dtype=float), values.shape)
    advantages = np.zeros_like(values)
    next_value = np.broadcast_to(np.asarray(bootstrap, dtype=float), values.shape[1:])
    carry = np.zeros(values.shape[1:])
    for t in range(steps - 1, -1, -1):
        delta = rewards[t] + gamma * next_value * nonterminal[t] - values[t]
        carry = delta + gamma * lam * nonterminal[t] * carry
        advantages[t] = carry
        next_value = values[t]
    return advantages, advantages + values


@dataclass
class AdamState:
    """Bias-corrected first/second moment accumulators per parameter tensor."""

    m: dict
    v: dict
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def init(cls, params: PolicyParams) -> "AdamState":
        tensors = params.tensors()
        return cls(
            m={name: np.zeros_like(arr) for name, arr in tensors.items()},
            v={name: np.zeros_like(arr) for name, arr in tensors.items()},
        )


def adam_step(
    state: AdamState, grads: dict, lr: float
) -> tuple[dict, AdamState]:
    """One moment-adaptive update; returns (parameter deltas, state).

    The state's accumulators are advanced in place.
    """
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    delta = {}
    for name, g in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        delta[name] = -lr * (m / correction1) / (np.sqrt(v / correction2) + state.eps)
    return delta, state


def clip_global_norm(grads: dict, max_norm: float) -> tuple[dict, float]:
    """Scale all gradients so their joint L2 norm is at most max_norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        grads = {name: g * scale for name, g in grads.items()}
    return grads, total


def ppo_loss_and_grad(
    params: PolicyParams, batch: dict, cfg: TrainConfig
) -> tuple[float, dict, dict]:
    """Clipped-surrogate PPO loss with analytic gradients.

    batch holds obs (B, D), actions (B, A), old_logp (B,), advantages (B,)
    and returns (B,).  The total loss is policy + value_coef * value
    - entropy_coef * entropy.  Returns (loss, grads, stats).
    """
    obs = batch["obs"]
    actions = batch["actions"]
    old_logp = batch["old_logp"]
    adv = batch["advantages"]
    ret = batch["returns"]
    n = obs.shape[0]

    mean, actor_acts = mlp_forward(params.actor_w, params.actor_b, obs)
    sigma = np.exp(params.log_std)
    z = (actions - mean) / sigma
    logp = np.sum(-params.log_std - 0.5 * LOG_2PI - 0.5 * z * z, axis=-1)
    ratio = np.exp(logp - old_logp)
    surr_raw = ratio * adv
    surr_clip = np.clip(ratio, 1.0 - cfg.clip_range, 1.0 + cfg.clip_range) * adv
    policy_loss = -float(np.mean(np.minimum(surr_raw, surr_clip)))

    value_out, critic_acts = mlp_forward(params.critic_w, params.critic_b, obs)
    value = value_out[:, 0]
    value_error = value - ret
    value_loss = float(np.mean(value_error**2))

    entropy = gaussian_entropy(params.log_std)
    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy

    # policy gradient: min() picks the raw branch on ties, where the clip
    # derivative is 1 anyway; a strictly smaller clipped branch is saturated
    use_raw = surr_raw <= surr_clip
    d_logp = np.where(use_raw, -adv / n, 0.0) * ratio
    d_mean = d_logp[:, None] * z / sigma
    d_log_std = (d_logp[:, None] * (z * z - 1.0)).sum(axis=0) - cfg.entropy_coef
    d_actor_w, d_actor_b, _ = mlp_backward(params.actor_w, actor_acts, d_mean)

    d_value = (cfg.value_coef * 2.0 / n) * value_error
    d_critic_w, d_critic_b, _ = mlp_backward(
        params.critic_w, critic_acts, d_value[:, None]
    )

    grads = {}
    for i in range(len(params.actor_w)):
        grads[f"actor.w{i}"] = d_actor_w[i]
        grads[f"actor.b{i}"] = d_actor_b[i]
    grads["log_std"] = d_log_std
    for i in range(len(params.critic_w)):
        grads[f"critic.w{i}"] = d_critic_w[i]
        grads[f"critic.b{i}"] = d_critic_b[i]

    stats = {
        "policy_loss": policy_loss,
        "value_loss": value_loss,
        "entropy": entropy,
        "clip_fraction": float(np.mean(np.abs(ratio - 1.0) > cfg.clip_range)),
        "approx_kl": float(np.mean(old_logp - logp)),
    }
    return loss, grads, stats


def ppo_update(
    params: PolicyParams,
    opt_state: AdamState,
    batch: dict,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> dict:
    """Epochs of shuffled minibatch updates over a flattened rollout batch.

    Advantages are normalized per minibatch.  Parameters and optimizer state
    are updated in place; returns mean loss statistics.
    """
    num_samples = batch["obs"].shape[0]
    if num_samples % cfg.minibatches != 0:
        raise ValueError(
            f"minibatches ({cfg.minibatches}) must divide batch size ({num_samples})"
        )
    mb_size = num_samples // cfg.minibatches
    totals: dict[str, float] = {}
    count = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(num_samples)
        for k in range(cfg.minibatches):
            idx = perm[k * mb_size : (k + 1) * mb_size]
            adv = batch["advantages"][idx]
            if cfg.advantage_normalization and mb_size > 1:
                adv = (adv - adv.mean()) / (adv.std() + 1e-8)
            minibatch = {
                "obs": batch["obs"][idx],
                "actions": batch["actions"][idx],
                "old_logp": batch["old_logp"][idx],
                "advantages": adv,
                "returns": batch["returns"][idx],
            }
            loss, grads, stats = ppo_loss_and_grad(params, minibatch, cfg)
            if not np.isfinite(loss):
                raise TrainingFault(
                    f"non-finite loss at optimizer step {opt_state.step + 1}: {stats!r}"
                )
            grads, grad_norm = clip_global_norm(grads, cfg.grad_norm_clip)
            delta, opt_state = adam_step(opt_state, grads, cfg.learning_rate)
            params.apply_delta(delta)
            stats["grad_norm"] = grad_norm
            for name, value in stats.items():
                totals[name] = totals.get(name, 0.0) + value
            count += 1
    return {name: value / count for name, value in totals.items()}


CURVE_STAT_COLUMNS = [
    "policy_loss",
    "value_loss",
    "entropy",
    "clip_fraction",
    "approx_kl",
    "grad_norm",
]


def curve_columns() -> list[str]:
    return (
        ["update", "env_steps", "mean_episode_return", "episodes_completed"]
        + CURVE_STAT_COLUMNS
        + RewardBreakdown.field_names()
    )


@dataclass
class TrainResult:
    params: PolicyParams
    opt_state: AdamState
    curve: list  # one dict per update, keys = curve_columns()
    env_steps: int


def train(
    cfg: TrainConfig,
    env_config: EnvConfig,
    phys: PhysicalParams,
    checkpoint_fn=None,
    log_fn=None,
) -> TrainResult:
    """Run the full rollout/update loop.

    Vectorized collection: one policy forward per step covers every
    environment and agent; environments are stepped with independent RNG
    streams split from the seed, so results do not depend on how the batch
    is scheduled.  checkpoint_fn(update, env_steps, params, opt_state) is
    invoked periodically and at the end; log_fn receives each curve row.
    """
    num_envs = cfg.num_envs
    steps = cfg.rollout_steps
    num_agents = env_config.num_agents
    samples_per_update = num_envs * steps * num_agents
    if samples_per_update % cfg.minibatches != 0:
        raise ValueError(
            "train.minibatches must divide num_envs * rollout_steps * num_agents "
            f"({samples_per_update})"
        )
    num_updates = max(1, math.ceil(cfg.total_steps / (num_envs * steps)))

    root = np.random.SeedSequence(cfg.seed)
    policy_seq, action_seq, shuffle_seq, *env_seqs = root.spawn(3 + num_envs)
    policy_rng = np.random.default_rng(policy_seq)
    action_rng = np.random.default_rng(action_seq)
    shuffle_rng = np.random.default_rng(shuffle_seq)

    envs = [Env(env_config, phys, np.random.default_rng(seq)) for seq in env_seqs]
    obs = np.stack([env.reset()[1] for env in envs])  # (N, Q, D)
    obs_dim = obs.shape[-1]
    params = init_policy(obs_dim, policy_rng, log_std_init=cfg.log_std_init)
    opt_state = AdamState.init(params)

    episode_return = np.zeros(num_envs)
    last_mean_return = 0.0
    curve: list[dict] = []
    breakdown_names = RewardBreakdown.field_names()

    obs_buf = np.zeros((steps, num_envs, num_agents, obs_dim))
    act_buf = np.zeros((steps, num_envs, num_agents, params.action_dim))
    logp_buf = np.zeros((steps, num_envs, num_agents))
    value_buf = np.zeros((steps, num_envs, num_agents))
    reward_buf = np.zeros((steps, num_envs))
    done_buf = np.zeros((steps, num_envs))

    env_steps = 0
    for update in range(1, num_updates + 1):
        completed: list[float] = []
        breakdown_sums = dict.fromkeys(breakdown_names, 0.0)
        for t in range(steps):
            flat = obs.reshape(num_envs * num_agents, obs_dim)
            mean = actor_forward(params, flat)
            actions, logp = sample_and_logprob(mean, params.log_std, action_rng)
            values = critic_forward(params, flat)

            obs_buf[t] = obs
            act_buf[t] = actions.reshape(num_envs, num_agents, -1)
            logp_buf[t] = logp.reshape(num_envs, num_agents)
            value_buf[t] = values.reshape(num_envs, num_agents)

            env_actions = act_buf[t]
            for n, env in enumerate(envs):
                try:
                    result = env.step(env_actions[n])
                except Exception as exc:  # annotate with the failing env
                    raise TrainingFault(
                        f"environment {n} failed at step {env.world.step_count if env.world else '?'}: {exc}"
                    ) from exc
                reward_buf[t, n] = result.shared_reward
                done_buf[t, n] = float(result.done)
                episode_return[n] += result.shared_reward
                for name, value in result.reward_breakdown.as_dict().items():
                    breakdown_sums[name] += value
                if result.done:
                    completed.append(episode_return[n])
                    episode_return[n] = 0.0
                    _, reset_obs = env.reset()
                    obs[n] = reset_obs
                else:
                    obs[n] = result.per_agent_obs
        env_steps += num_envs * steps

        bootstrap = critic_forward(
            params, obs.reshape(num_envs * num_agents, obs_dim)
        ).reshape(num_envs, num_agents)
        advantages, returns = compute_gae(
            reward_buf[:, :, None],
            value_buf,
            done_buf[:, :, None],
            bootstrap,
            cfg.gamma,
            cfg.gae_lambda,
        )

        batch = {
            "obs": obs_buf.reshape(-1, obs_dim),
            "actions": act_buf.reshape(-1, params.action_dim),
            "old_logp": logp_buf.reshape(-1),
            "advantages": advantages.reshape(-1),
            "returns": returns.reshape(-1),
        }
        stats = ppo_update(params, opt_state, batch, cfg, shuffle_rng)

        if completed:
            last_mean_return = float(np.mean(completed))
        row = {
            "update": update,
            "env_steps": env_steps,
            "mean_episode_return": last_mean_return,
            "episodes_completed": len(completed),
        }
        for name in CURVE_STAT_COLUMNS:
            row[name] = stats[name]
        total_transitions = steps * num_envs
        for name in breakdown_names:
            row[name] = breakdown_sums[name] / total_transitions
        curve.append(row)
        if log_fn is not None:
            log_fn(row)
        if checkpoint_fn is not None and (
            update % cfg.checkpoint_interval == 0 or update == num_updates
        ):
            checkpoint_fn(update, env_steps, params, opt_state)
    return TrainResult(params=params, opt_state=opt_state, curve=curve, env_steps=env_steps)
