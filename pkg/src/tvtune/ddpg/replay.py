from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring of transitions; the oldest entry is overwritten first."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, seed=None):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs = np.zeros((self.capacity, obs_dim))
        self.act = np.zeros((self.capacity, act_dim))
        self.rew = np.zeros(self.capacity)
        self.next_obs = np.zeros((self.capacity, obs_dim))
        self.done = np.zeros(self.capacity)
        self.size = 0
        self.pos = 0
        self.pushed = 0
        self.rng = np.random.default_rng(seed)

    def __len__(self):
        return self.size

    def push(self, obs, action, reward, next_obs, done) -> None:
        i = self.pos
        self.obs[i] = obs
        self.act[i] = action
        self.rew[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(done)
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.pushed += 1

    def add(self, t: Transition) -> None:
        self.push(t.obs, t.action, t.reward, t.next_obs, t.done)

    def sample_indices(self, n: int) -> np.ndarray:
        return self.rng.integers(0, self.size, size=n)

    def sample(self, n: int):
        """Uniform minibatch (with replacement) as a tuple of arrays."""
        idx = self.sample_indices(n)
        return (self.obs[idx], self.act[idx], self.rew[idx],
                self.next_obs[idx], self.done[idx])

    def ordered(self):
        """Stored transitions from oldest to newest (rewards only; for checks)."""
        if self.size < self.capacity:
            return self.rew[:self.size].copy()
        return np.concatenate([self.rew[self.pos:], self.rew[:self.pos]])
