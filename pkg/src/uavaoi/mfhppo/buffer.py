"""Fixed-capacity on-policy rollout storage."""
from __future__ import annotations

import numpy as np


class RolloutBuffer:
    """Stores one row per time step; each row holds a batch of ``n_agents`` agents.

    The per-step cost is shared by all agents. ``mean_field`` keeps the
    neighbour block of each observation separately for inspection.
    """

    def __init__(self, capacity: int, n_agents: int, obs_dim: int, mf_dim: int, cont_dim: int = 3,
                 state_dim: int = 0):
        self.capacity = capacity
        self.obs = np.zeros((capacity, n_agents, obs_dim))
        self.mean_field = np.zeros((capacity, n_agents, mf_dim))
        self.cont = np.zeros((capacity, n_agents, cont_dim))
        self.disc = np.zeros((capacity, n_agents), dtype=int)
        self.cost = np.zeros(capacity)
        self.log_prob = np.zeros((capacity, n_agents))
        self.value = np.zeros((capacity, n_agents))
        self.done = np.zeros(capacity, dtype=bool)
        # recurrent state seen by the sampler before each step
        self.h0 = np.zeros((capacity, n_agents, state_dim))
        self.c0 = np.zeros((capacity, n_agents, state_dim))
        self.size = 0

    def __len__(self):
        return self.size

    @property
    def full(self) -> bool:
        return self.size == self.capacity

    def add(self, obs, mean_field, cont, disc, cost, log_prob, value, done,
            h0=None, c0=None) -> None:
        if self.full:
            raise OverflowError(f"rollout buffer is full ({self.capacity} steps)")
        k = self.size
        self.obs[k] = obs
        self.mean_field[k] = mean_field
        self.cont[k] = cont
        self.disc[k] = disc
        self.cost[k] = cost
        self.log_prob[k] = log_prob
        self.value[k] = value
        self.done[k] = done
        if h0 is not None:
            self.h0[k] = h0
            self.c0[k] = c0
        self.size += 1

    def clear(self) -> None:
        self.size = 0

    def view(self, name: str) -> np.ndarray:
        return getattr(self, name)[: self.size]
