"""Wall-time scaling of MF-HPPO training with the number of UAVs."""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..mfhppo.train import train
from .config import ExperimentConfig


@dataclass(frozen=True)
class BenchResult:
    counts: tuple
    seconds: tuple
    exponent: float  # slope of log(time) against log(count)
    episodes: int
    episode_length: int

    def table(self) -> str:
        lines = ["n_uavs,seconds"]
        lines += [f"{n},{s:.4f}" for n, s in zip(self.counts, self.seconds)]
        return "\n".join(lines) + "\n"


def fit_exponent(counts, seconds) -> float:
    """Least-squares slope of ``log(seconds)`` on ``log(counts)``."""
    x = np.log(np.asarray(counts, dtype=float))
    y = np.log(np.asarray(seconds, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


def bench_scaling(cfg: ExperimentConfig, uav_counts, episodes: int = 2,
                  episode_length: int | None = None, seed: int = 0,
                  repeats: int = 1) -> BenchResult:
    """Time training for each UAV count with everything else held fixed.

    Each agent gets its own networks (no parameter sharing) so the work per
    agent is constant. One untimed warmup run precedes the measurements;
    each count keeps the fastest of ``repeats`` runs.
    """
    counts = tuple(int(n) for n in uav_counts)
    if len(counts) < 2:
        raise ConfigError("need at least two UAV counts")
    if min(counts) < 1:
        raise ConfigError("UAV counts must be positive")
    L = episode_length or cfg.experiment.episode_length
    hp = dataclasses.replace(cfg.train, episodes=episodes, episode_length=L,
                             buffer_size=max(L, cfg.train.buffer_size) if episode_length is None
                             else L, share_params=False)

    def run(n):
        env = dataclasses.replace(cfg.env, n_uavs=n)
        t0 = time.perf_counter()
        train(env, hp, seed)
        return time.perf_counter() - t0

    run(counts[0])  # warmup: imports, allocator, caches
    seconds = tuple(min(run(n) for _ in range(max(1, repeats))) for n in counts)
    return BenchResult(counts, seconds, fit_exponent(counts, seconds), episodes, L)
