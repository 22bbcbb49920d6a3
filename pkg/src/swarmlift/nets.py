"""Actor/critic networks as plain numpy with hand-written reverse mode.

The topology is fixed (dense layers with tanh hidden activations, linear
heads), so gradients are derived by hand rather than pulling in an autodiff
framework.  Weights are stored (in, out); forward is x @ W + b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTOR_WIDTHS = (64, 64, 64)
CRITIC_WIDTHS = (128, 128, 128)
ACTION_DIM = 4

LOG_2PI = float(np.log(2.0 * np.pi))


def orthogonal(rows: int, cols: int, gain: float, rng: np.random.Generator) -> np.ndarray:
    """Semi-orthogonal (rows, cols) matrix scaled by gain.

    For rows <= cols the rows are orthonormal (W @ W.T = gain^2 I);
    otherwise the columns are.
    """
    flat = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(flat)
    q = q * np.sign(np.diag(r))  # fix the sign ambiguity of QR
    if rows <= cols:
        return gain * q.T
    return gain * q


def _init_mlp(
    in_dim: int,
    widths: tuple,
    out_dim: int,
    head_gain: float,
    rng: np.random.Generator,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Orthogonal weights (sqrt(2) hidden, head_gain output), zero biases."""
    dims = [in_dim, *widths, out_dim]
    ws, bs = [], []
    for layer in range(len(dims) - 1):
        gain = head_gain if layer == len(dims) - 2 else np.sqrt(2.0)
        ws.append(orthogonal(dims[layer + 1], dims[layer], gain, rng).T)
        bs.append(np.zeros(dims[layer + 1]))
    return ws, bs


@dataclass
class PolicyParams:
    """Shared actor/critic parameters plus the state-independent log std."""

    actor_w: list
    actor_b: list
    log_std: np.ndarray
    critic_w: list
    critic_b: list

    @property
    def obs_dim(self) -> int:
        return self.actor_w[0].shape[0]

    @property
    def action_dim(self) -> int:
        return self.actor_w[-1].shape[1]

    @property
    def actor_widths(self) -> tuple:
        return tuple(w.shape[1] for w in self.actor_w[:-1])

    @property
    def critic_widths(self) -> tuple:
        return tuple(w.shape[1] for w in self.critic_w[:-1])

    def tensors(self) -> dict[str, np.ndarray]:
        """Ordered flat name -> array view (shared references)."""
        out: dict[str, np.ndarray] = {}
        for i, (w, b) in enumerate(zip(self.actor_w, self.actor_b)):
            out[f"actor.w{i}"] = w
            out[f"actor.b{i}"] = b
        out["log_std"] = self.log_std
        for i, (w, b) in enumerate(zip(self.critic_w, self.critic_b)):
            out[f"critic.w{i}"] = w
            out[f"critic.b{i}"] = b
        return out

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            [w.copy() for w in self.actor_w],
            [b.copy() for b in self.actor_b],
            self.log_std.copy(),
            [w.copy() for w in self.critic_w],
            [b.copy() for b in self.critic_b],
        )

    def apply_delta(self, delta: dict[str, np.ndarray]) -> None:
        for name, arr in self.tensors().items():
            arr += delta[name]


def init_policy(
    obs_dim: int,
    rng: np.random.Generator,
    action_dim: int = ACTION_DIM,
    actor_widths: tuple = ACTOR_WIDTHS,
    critic_widths: tuple = CRITIC_WIDTHS,
    log_std_init: float = 0.0,
) -> PolicyParams:
    """Orthogonal init, zero bias; mean head gain 0.01, value head 1.0."""
    actor_w, actor_b = _init_mlp(obs_dim, actor_widths, action_dim, 0.01, rng)
    critic_w, critic_b = _init_mlp(obs_dim, critic_widths, 1, 1.0, rng)
    return PolicyParams(
        actor_w, actor_b, np.full(action_dim, float(log_std_init)), critic_w, critic_b
    )


def mlp_forward(ws: list, bs: list, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Tanh hidden layers, linear head.  Returns (output, activation cache)."""
    acts = [x]
    h = x
    for w, b in zip(ws[:-1], bs[:-1]):
        h = np.tanh(h @ w + b)
        acts.append(h)
    return h @ ws[-1] + bs[-1], acts


def mlp_backward(
    ws: list, acts: list, d_out: np.ndarray
) -> tuple[list, list, np.ndarray]:
    """Gradients of a scalar loss given d loss / d output.

    Returns (d_ws, d_bs, d_input), matching mlp_forward's cache.
    """
    d_ws = [None] * len(ws)
    d_bs = [None] * len(ws)
    d_h = d_out
    for layer in range(len(ws) - 1, -1, -1):
        d_ws[layer] = acts[layer].T @ d_h
        d_bs[layer] = d_h.sum(axis=0)
        d_h = d_h @ ws[layer].T
        if layer > 0:
            d_h = d_h * (1.0 - acts[layer] ** 2)  # tanh'
    return d_ws, d_bs, d_h


def actor_forward(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    """Mean action(s) for a (batch of) observation(s)."""
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    if obs.shape[-1] != params.obs_dim:
        raise ValueError(
            f"observation dim {obs.shape[-1]} does not match policy ({params.obs_dim})"
        )
    mean, _ = mlp_forward(params.actor_w, params.actor_b, obs)
    return mean


def critic_forward(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    """State value(s); returns shape (batch,)."""
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    if obs.shape[-1] != params.obs_dim:
        raise ValueError(
            f"observation dim {obs.shape[-1]} does not match policy ({params.obs_dim})"
        )
    value, _ = mlp_forward(params.critic_w, params.critic_b, obs)
    return value[..., 0]


def gaussian_logprob(
    mean: np.ndarray, log_std: np.ndarray, action: np.ndarray
) -> np.ndarray:
    """Diagonal-Gaussian log density, summed over action components."""
    z = (action - mean) / np.exp(log_std)
    return np.sum(-log_std - 0.5 * LOG_2PI - 0.5 * z * z, axis=-1)


def gaussian_entropy(log_std: np.ndarray) -> float:
    """Closed-form entropy of the diagonal Gaussian."""
    return float(np.sum(log_std + 0.5 * (LOG_2PI + 1.0)))


def sample_and_logprob(
    mean: np.ndarray,
    log_std: np.ndarray,
    rng: np.random.Generator,
    deterministic: bool = False,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample actions (or take the mean) and return their log density."""
    if deterministic:
        action = np.array(mean, copy=True)
    else:
        action = mean + np.exp(log_std) * rng.standard_normal(np.shape(mean))
    return action, gaussian_logprob(mean, log_std, action)
