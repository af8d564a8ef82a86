"""Episode runner shared by the learner evaluation and the baselines."""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .mmdp import EnvConfig, HybridAction, Observation, env_step, reset
from .scenario import generate_scenario
from .seeding import episode_seeds, streams
from .world import WorldState


@dataclass(frozen=True)
class EpisodeMetrics:
    episode: int
    mean_cost: float
    wall_ms: float


Chooser = Callable[[WorldState, Sequence[Observation], int], Sequence[HybridAction]]


def scenario_for(env: EnvConfig, seed: int) -> np.ndarray:
    """The fixed sensor layout used by every algorithm for ``seed``."""
    return generate_scenario(env.sensor_distribution, env.n_sensors, env.bounds,
                             streams(seed)["scenario"])


def run_episodes(env: EnvConfig, seed: int, episodes: int, episode_length: int,
                 choose: Chooser, on_reset: Callable[[int], None] | None = None,
                 on_step: Callable | None = None) -> list[EpisodeMetrics]:
    """Play ``episodes`` episodes, calling ``choose(world, obs, t)`` for joint actions.

    ``on_step(episode, t, world, actions, cost, next_world, next_obs)`` sees
    every transition; returns per-episode mean cost.
    """
    sensors = scenario_for(env, seed)
    seeds = episode_seeds(seed, episodes)
    out = []
    for ep in range(episodes):
        t0 = time.perf_counter()
        world, obs = reset(env, int(seeds[ep]), sensors)
        if on_reset is not None:
            on_reset(ep)
        total = 0.0
        for t in range(episode_length):
            actions = choose(world, obs, t)
            nxt, nobs, cost = env_step(world, actions)
            if on_step is not None:
                on_step(ep, t, world, actions, cost, nxt, nobs)
            world, obs = nxt, nobs
            total += cost
        out.append(EpisodeMetrics(ep, total / episode_length, (time.perf_counter() - t0) * 1e3))
    return out
