"""Multi-agent DQN baseline: every UAV flies a fixed circle and learns, with
its own Q-network, which sensor to schedule and how fast to fly."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigError, NonFiniteError, TrainingDiverged
from ..mmdp import EnvConfig, HybridAction, collect, observe, reset
from ..neural import AdamState, Mlp, adam_update, autograd as ag, clip_grad_norm
from ..rollout import EpisodeMetrics, scenario_for
from ..seeding import episode_seeds, streams
from ..world import UavState, WorldState, average_aoi


@dataclass(frozen=True)
class DqnConfig:
    speed_levels: tuple = (5.0, 10.0, 15.0)
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int = 150
    replay_capacity: int = 20000
    batch_size: int = 32
    warmup: int = 200  # transitions stored before learning starts
    target_sync: int = 200  # gradient steps between target-network copies
    gamma: float = 0.99
    lr: float = 1e-3
    hidden: tuple = (64, 64)
    max_grad_norm: float = 10.0
    episodes: int = 300
    episode_length: int = 40
    # circle layout; None means derived from the area and the number of UAVs
    centers: tuple | None = None
    radius: float | None = None

    def __post_init__(self):
        for e in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= e <= 1.0:
                raise ConfigError(f"epsilon must lie in [0, 1], got {e}")
        if not self.speed_levels:
            raise ConfigError("need at least one speed level")
        if self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ConfigError("replay_capacity must hold at least one batch")
        if self.radius is not None and self.radius <= 0:
            raise ConfigError("radius must be positive")

    def validate_for(self, env: EnvConfig) -> None:
        for s in self.speed_levels:
            if not env.v_min <= s <= env.v_max:
                raise ConfigError(f"speed level {s} outside [{env.v_min}, {env.v_max}]")

    def epsilon(self, episode: int) -> float:
        if self.epsilon_decay_episodes <= 0:
            return self.epsilon_end
        frac = episode / self.epsilon_decay_episodes
        if frac >= 1.0:
            return self.epsilon_end
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)


def circle_layout(env: EnvConfig, n_uavs: int | None = None):
    """Grid-cell centers, one per UAV, and a radius of a quarter of the smaller cell side."""
    n = env.n_uavs if n_uavs is None else n_uavs
    gx = math.ceil(math.sqrt(n))
    gy = math.ceil(n / gx)
    b = env.bounds
    cw, ch = b.width / gx, b.height / gy
    centers = np.array([(b.x_min + (k % gx + 0.5) * cw, b.y_min + (k // gx + 0.5) * ch)
                        for k in range(n)])
    return centers, min(cw, ch) / 4.0


def circle_point(center, radius: float, angle: float) -> np.ndarray:
    return np.asarray(center, dtype=float) + radius * np.array([math.cos(angle), math.sin(angle)])


def select_action(q_values: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy choice; ties in the greedy branch go to the lowest index."""
    if rng.uniform() < epsilon:
        return int(rng.integers(len(q_values)))
    return int(np.argmax(q_values))


class ReplayBuffer:
    """Ring buffer of ``(obs, action, reward, next_obs, done)`` transitions."""

    def __init__(self, capacity: int, obs_dim: int):
        self.capacity = capacity
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        self.action = np.zeros(capacity, dtype=int)
        self.reward = np.zeros(capacity)
        self.done = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def add(self, obs, action, reward, next_obs, done) -> None:
        k = self._next
        self.obs[k], self.action[k], self.reward[k] = obs, action, reward
        self.next_obs[k], self.done[k] = next_obs, done
        self._next = (k + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> dict:
        idx = rng.integers(self.size, size=n)
        return {"obs": self.obs[idx], "action": self.action[idx], "reward": self.reward[idx],
                "next_obs": self.next_obs[idx], "done": self.done[idx]}


class DqnAgent:
    """Online and target Q-networks over ``n_actions`` joint (sensor, speed) choices."""

    def __init__(self, obs_dim: int, n_actions: int, cfg: DqnConfig, rng: np.random.Generator,
                 name: str = "dqn"):
        self.cfg = cfg
        self.n_actions = n_actions
        sizes = [obs_dim, *cfg.hidden, n_actions]
        self.online = Mlp(sizes, "relu", name=name, rng=rng)
        self.target = Mlp(sizes, "relu", name=name, rng=rng)
        self.flat = self.online.flatten()
        self.sync_target()
        self.adam = AdamState(lr=cfg.lr)
        self.updates = 0

    def sync_target(self) -> None:
        self.target.load_state_dict(self.online.state_dict())

    def q_values(self, obs) -> np.ndarray:
        return self.online(np.atleast_2d(obs)).data

    def td_targets(self, batch: dict) -> np.ndarray:
        q_next = self.target(batch["next_obs"]).data.max(axis=1)
        return batch["reward"] + self.cfg.gamma * (~batch["done"]) * q_next

    def td_loss(self, batch: dict, targets: np.ndarray | None = None):
        """Mean squared TD error of the taken actions, as a tensor."""
        targets = self.td_targets(batch) if targets is None else targets
        q = self.online(batch["obs"])
        taken = ag.getitem(q, (np.arange(len(targets)), batch["action"]))
        return ((taken - targets) ** 2).mean()

    def train_step(self, batch: dict, targets: np.ndarray | None = None) -> float:
        params = self.online.parameters()
        try:
            loss = self.td_loss(batch, targets)
            if not math.isfinite(loss.item()):
                raise NonFiniteError("td_loss", "objective")
            grads = ag.grad(loss, params.values())
        except NonFiniteError as exc:
            raise TrainingDiverged(f"DQN update {self.updates} produced non-finite values: {exc}",
                                   {"update": self.updates, "where": exc.where}) from exc
        g = {"params": np.concatenate([x.ravel() for x in grads])}
        if self.cfg.max_grad_norm > 0:
            clip_grad_norm(g, self.cfg.max_grad_norm)
        adam_update({"params": self.flat}, g, self.adam)
        self.updates += 1
        if self.updates % self.cfg.target_sync == 0:
            self.sync_target()
        return loss.item()


def circle_step(world: WorldState, angles, speeds, sensor_indices, centers, radius: float):
    """Advance every UAV along its circle and run the data exchange.

    Returns ``(world', new_angles, cost)``.
    """
    new_angles = np.asarray(angles, dtype=float) + np.asarray(speeds, dtype=float) * world.dt / radius
    uavs, actions = [], []
    for uav, a, s, ctr, j in zip(world.uavs, new_angles, speeds, centers, sensor_indices):
        pos = circle_point(ctr, radius, a)
        vel = (pos - uav.position) / world.dt
        uavs.append(UavState(uav.id, pos, vel, uav.altitude))
        d = pos - uav.position
        actions.append(HybridAction(int(j), (float(d[0]), float(d[1])), float(s)))
    sensors = collect(world, uavs, sensor_indices)
    new = replace(world, time=(world.step_index + 1) * world.dt, step_index=world.step_index + 1,
                  uavs=tuple(uavs), sensors=sensors, last_actions=tuple(actions))
    return new, new_angles, average_aoi(new)


@dataclass
class MadqnResult:
    metrics: list
    agents: list

    @property
    def costs(self) -> np.ndarray:
        return np.array([m.mean_cost for m in self.metrics])


def madqn_train(env: EnvConfig, cfg: DqnConfig, seed: int, on_episode=None) -> MadqnResult:
    """Independent DQN learners, one per UAV, sharing the team reward ``-cost``.

    Each episode places every UAV at a random phase on its circle; the action
    index encodes ``sensor * len(speed_levels) + speed_level``.
    """
    cfg.validate_for(env)
    rngs = streams(seed)
    centers, radius = circle_layout(env)
    if cfg.centers is not None:
        centers = np.asarray(cfg.centers, dtype=float)
    if cfg.radius is not None:
        radius = cfg.radius
    if centers.shape != (env.n_uavs, 2):
        raise ConfigError(f"need {env.n_uavs} circle centers, got {centers.shape}")
    S = len(cfg.speed_levels)
    n_actions = env.n_sensors * S
    agents = [DqnAgent(env.obs_dim, n_actions, cfg, rngs["init"], name=f"dqn{i}")
              for i in range(env.n_uavs)]
    replays = [ReplayBuffer(cfg.replay_capacity, env.obs_dim) for _ in agents]
    sensors = scenario_for(env, seed)
    seeds = episode_seeds(seed, cfg.episodes)
    act_rng, opt_rng = rngs["act"], rngs["opt"]
    levels = np.asarray(cfg.speed_levels, dtype=float)
    metrics = []
    for ep in range(cfg.episodes):
        t0 = time.perf_counter()
        world, _ = reset(env, int(seeds[ep]), sensors)
        angles = world.rng.uniform(0.0, 2 * math.pi, size=env.n_uavs)
        uavs = tuple(UavState(u.id, circle_point(c, radius, a), np.zeros(2), u.altitude)
                     for u, c, a in zip(world.uavs, centers, angles))
        world = replace(world, uavs=uavs)
        obs = observe(world)
        eps = cfg.epsilon(ep)
        total = 0.0
        for t in range(cfg.episode_length):
            acts = [select_action(ag_.q_values(o.vector)[0], eps, act_rng)
                    for ag_, o in zip(agents, obs)]
            world, angles, cost = circle_step(world, angles, levels[[a % S for a in acts]],
                                              [a // S for a in acts], centers, radius)
            nobs = observe(world)
            done = t == cfg.episode_length - 1
            for k, agent in enumerate(agents):
                replays[k].add(obs[k].vector, acts[k], -cost, nobs[k].vector, done)
                if len(replays[k]) >= max(cfg.warmup, cfg.batch_size):
                    agent.train_step(replays[k].sample(cfg.batch_size, opt_rng))
            obs = nobs
            total += cost
        m = EpisodeMetrics(ep, total / cfg.episode_length, (time.perf_counter() - t0) * 1e3)
        metrics.append(m)
        if on_episode is not None:
            on_episode(m)
    return MadqnResult(metrics, agents)
