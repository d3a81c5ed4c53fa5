"""Deep deterministic policy gradient on plain numpy."""
from .agent import (OBS_SCALE, Hyperparams, Networks, Policy, TrainResult, actor_forward,
                    actor_update, critic_forward, critic_update, explore, noise_std, train)
from .mlp import Adam, Mlp, soft_update
from .replay import ReplayBuffer, Transition
from .serialize import dumps, load_policy, loads, save_policy

__all__ = [
    "OBS_SCALE", "Adam", "Hyperparams", "Mlp", "Networks", "Policy", "ReplayBuffer",
    "TrainResult", "Transition", "actor_forward", "actor_update", "critic_forward",
    "critic_update", "dumps", "explore", "load_policy", "loads", "noise_std",
    "save_policy", "soft_update", "train",
]
