"""Uniform-sampling ring replay buffer.

Stores transitions as parallel numpy rings sized on the first insert;
once full, new records overwrite the oldest (FIFO). Sampling is uniform
with replacement over the current contents.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TransitionBatch:
    """Mini-batch of stored transitions, stacked along axis 0."""

    obs: np.ndarray
    actions: np.ndarray
    local_rewards: np.ndarray
    global_rewards: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray


class ReplayBuffer:
    def __init__(self, capacity: int, rng: np.random.Generator):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.rng = rng
        self.size = 0
        self.cursor = 0
        self._storage = None

    def _allocate(self, obs, actions, local_rewards):
        def ring(example):
            example = np.asarray(example, dtype=float)
            return np.zeros((self.capacity,) + example.shape)

        self._storage = {
            "obs": ring(obs),
            "actions": ring(actions),
            "local_rewards": ring(local_rewards),
            "global_rewards": np.zeros(self.capacity),
            "next_obs": ring(obs),
            "done": np.zeros(self.capacity),
        }

    def add(self, obs, actions, local_rewards, global_reward, next_obs,
            done: bool) -> None:
        if self._storage is None:
            self._allocate(obs, actions, local_rewards)
        s = self._storage
        i = self.cursor
        s["obs"][i] = obs
        s["actions"][i] = actions
        s["local_rewards"][i] = local_rewards
        s["global_rewards"][i] = global_reward
        s["next_obs"][i] = next_obs
        s["done"][i] = float(done)
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def __len__(self) -> int:
        return self.size

    def sample(self, batch_size: int) -> TransitionBatch:
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        idx = self.rng.integers(0, self.size, size=batch_size)
        s = self._storage
        return TransitionBatch(
            obs=s["obs"][idx], actions=s["actions"][idx],
            local_rewards=s["local_rewards"][idx],
            global_rewards=s["global_rewards"][idx],
            next_obs=s["next_obs"][idx], done=s["done"][idx])
