"""swarmlift: multi-quadrotor cable-suspended payload transport.

Deterministic rigid-body simulation, a Dec-POMDP training environment with
domain randomization, an independent-PPO trainer with parameter sharing, and
an evaluation harness for recovery and trajectory-tracking metrics.
"""

__version__ = "0.1.0"

from .env import Env, EnvConfig, DRConfig, DisturbanceConfig, StepResult
from .evaluate import EvalConfig, ReferenceTrajectory, recovery_rate, run_episode
from .nets import PolicyParams, init_policy
from .physics import ExternalWrench, MotorBank, PhysicalParams, WorldState
from .ppo import TrainConfig, train
from .rewards import RewardBreakdown, RewardConstants, reward_total

__all__ = [
    "Env",
    "EnvConfig",
    "DRConfig",
    "DisturbanceConfig",
    "StepResult",
    "EvalConfig",
    "ReferenceTrajectory",
    "recovery_rate",
    "run_episode",
    "PolicyParams",
    "init_policy",
    "ExternalWrench",
    "MotorBank",
    "PhysicalParams",
    "WorldState",
    "TrainConfig",
    "train",
    "RewardBreakdown",
    "RewardConstants",
    "reward_total",
    "__version__",
]
