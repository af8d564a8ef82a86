"""Non-learning baselines: random scheduling/trajectory (RSTD) and max-AoI (NAMAS)."""
from __future__ import annotations

import numpy as np

from ..mmdp import EnvConfig, HybridAction
from ..rollout import run_episodes
from ..seeding import streams
from ..world import WorldState


def rstd_policy(world: WorldState, agent: int, rng: np.random.Generator) -> HybridAction:
    """Uniformly random sensor, waypoint offset and speed."""
    cfg = world.config
    bound = cfg.offset_bound
    j = int(rng.integers(len(world.sensors)))
    off = rng.uniform(-bound, bound, size=2)
    speed = float(rng.uniform(world.v_min, world.v_max))
    return HybridAction(j, (float(off[0]), float(off[1])), speed)


def namas_policy(world: WorldState, agent: int, radius: float | None = None) -> HybridAction:
    """Schedule the stalest sensor and fly straight at it at full speed.

    Ties go to the lowest sensor index. With ``radius`` only sensors within that
    horizontal distance are candidates (falling back to all sensors when none
    are in range).
    """
    aois = world.aois()
    candidates = np.arange(len(aois))
    me = world.uavs[agent].position
    sensor_pos = world.sensor_positions()
    if radius is not None:
        near = np.hypot(*(sensor_pos - me).T) <= radius
        if near.any():
            candidates = candidates[near]
    j = int(candidates[np.argmax(aois[candidates])])
    delta = sensor_pos[j] - me
    # offsets are clipped per axis, so shrink uniformly to keep the heading
    bound = world.config.offset_bound
    big = float(np.max(np.abs(delta)))
    if big > bound:
        delta = delta * (bound / big)
    return HybridAction(j, (float(delta[0]), float(delta[1])), float(world.v_max))


def namas_velocity(world: WorldState, agent: int) -> np.ndarray:
    """The commanded velocity NAMAS produces: unit vector to target times v_max."""
    a = namas_policy(world, agent)
    d = np.asarray(a.waypoint_offset)
    n = float(np.hypot(*d))
    return np.zeros(2) if n == 0 else d / n * world.v_max


def run_rstd(env: EnvConfig, seed: int, episodes: int, episode_length: int):
    rng = streams(seed)["act"]
    return run_episodes(env, seed, episodes, episode_length,
                        lambda w, o, t: [rstd_policy(w, i, rng) for i in range(len(w.uavs))])


def run_namas(env: EnvConfig, seed: int, episodes: int, episode_length: int,
              radius: float | None = None):
    return run_episodes(env, seed, episodes, episode_length,
                        lambda w, o, t: [namas_policy(w, i, radius) for i in range(len(w.uavs))])
