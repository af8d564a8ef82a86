"""MF-HPPO training loop: sample with the frozen policy, estimate advantages,
run several clipped-PPO epochs, then synchronise the sampling policy."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, NonFiniteError, TrainingDiverged
from ..mmdp import EnvConfig, env_step, reset
from ..neural import AdamState, adam_update, autograd as ag, clip_grad_norm
from ..rollout import EpisodeMetrics, run_episodes, scenario_for
from ..seeding import episode_seeds, streams
from .buffer import RolloutBuffer
from .losses import gae, hybrid_entropy, normalize_advantages, ppo_clip_loss, total_loss
from .policy import CONT_DIM, PolicyNets, PolicySpec

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 3000
    episode_length: int = 40
    buffer_size: int = 40
    epochs: int = 8
    minibatch_size: int = 4
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    lr: float = 3e-4
    k1: float = 0.2
    k2: float = 3.0
    entropy_mode: str = "product"
    encoder_width: int = 256
    hidden_width: int = 256
    hidden_layers: int = 2
    use_lstm: bool = True
    share_params: bool = True
    max_grad_norm: float = 0.5  # <= 0 disables clipping
    reward_scale: float = 1.0
    normalize_advantages: bool = True
    # "stored-state": each sampled step is re-encoded from the recurrent state
    # the sampler had there; "full-prefix": backpropagate through the episode prefix
    recurrence: str = "stored-state"
    # episodes end on a time limit, not a terminal state: bootstrap the last
    # step from the critic's value of the final observation
    bootstrap_final: bool = True
    # subtract the buffer's mean cost before advantage estimation
    center_rewards: bool = False

    def __post_init__(self):
        if self.episodes < 1 or self.episode_length < 1:
            raise ConfigError("episodes and episode_length must be positive")
        if self.buffer_size < self.episode_length:
            raise ConfigError("buffer_size must hold a whole episode")
        if not 0.0 < self.clip < 1.0:
            raise ConfigError(f"clip must lie in (0, 1), got {self.clip}")
        if self.epochs < 1 or self.minibatch_size < 1:
            raise ConfigError("epochs and minibatch_size must be positive")
        if self.entropy_mode not in ("product", "sum"):
            raise ConfigError(f"unknown entropy_mode {self.entropy_mode!r}")
        if self.recurrence not in ("stored-state", "full-prefix"):
            raise ConfigError(f"unknown recurrence {self.recurrence!r}")

    def policy_spec(self, env: EnvConfig) -> PolicySpec:
        return PolicySpec.for_env(env, encoder_width=self.encoder_width,
                                  hidden_width=self.hidden_width,
                                  hidden_layers=self.hidden_layers, use_lstm=self.use_lstm)


@dataclass
class Learner:
    """One trainable policy, its sampling snapshot and the agents it drives."""

    agents: list
    policy: PolicyNets
    sampler: PolicyNets
    adam: AdamState
    buffer: RolloutBuffer
    syncs: int = 0
    flat: np.ndarray = None

    def __post_init__(self):
        self.flat = self.policy.flatten()

    def sync(self) -> None:
        self.sampler.load_state_dict(self.policy.state_dict())
        self.syncs += 1


@dataclass
class TrainResult:
    metrics: list
    learners: list
    phase_stats: list = field(default_factory=list)

    @property
    def costs(self) -> np.ndarray:
        return np.array([m.mean_cost for m in self.metrics])

    def state_dict(self) -> dict:
        out = {}
        for k, lr in enumerate(self.learners):
            for name, arr in lr.policy.state_dict().items():
                out[f"group{k}/{name}"] = arr
        return out


def make_learners(env: EnvConfig, hp: TrainConfig, rng: np.random.Generator) -> list[Learner]:
    spec = hp.policy_spec(env)
    groups = [list(range(env.n_uavs))] if hp.share_params else [[i] for i in range(env.n_uavs)]
    mf_dim = 5 + env.n_sensors
    learners = []
    for agents in groups:
        policy = PolicyNets(spec, rng)
        sampler = PolicyNets(spec, rng)
        sampler.load_state_dict(policy.state_dict())
        buf = RolloutBuffer(hp.buffer_size, len(agents), env.obs_dim, mf_dim, CONT_DIM,
                            spec.encoder_width if spec.use_lstm else 0)
        learners.append(Learner(agents, policy, sampler, AdamState(lr=hp.lr), buf))
    return learners


def learners_from_state(env: EnvConfig, hp: TrainConfig, state: dict) -> list[Learner]:
    """Rebuild learners from :meth:`TrainResult.state_dict` output."""
    learners = make_learners(env, hp, np.random.default_rng(0))
    for k, lr in enumerate(learners):
        prefix = f"group{k}/"
        own = {name[len(prefix):]: a for name, a in state.items() if name.startswith(prefix)}
        lr.policy.load_state_dict(own)
        lr.sync()
    return learners


def _minibatch_loss(policy: PolicyNets, hp: TrainConfig, data: dict, idx: np.ndarray):
    B = data["obs"].shape[1]
    if policy.spec.use_lstm and hp.recurrence == "stored-state":
        E = policy.spec.encoder_width
        feats = policy.encoder.sequence(data["obs"][idx].reshape(1, -1, data["obs"].shape[-1]),
                                        data["h0"][idx].reshape(-1, E),
                                        data["c0"][idx].reshape(-1, E))
    elif policy.spec.use_lstm:
        seq = policy.encode_sequence(data["obs"][: idx[-1] + 1])
        feats = seq[idx]
    else:
        feats = policy.encoder(data["obs"][idx])
    feats = ag.reshape(feats, (len(idx) * B, feats.shape[-1]))
    lp, _, _, h_c, h_d, value = policy.evaluate(
        feats, data["cont"][idx].reshape(-1, CONT_DIM), data["disc"][idx].reshape(-1))
    old = data["log_prob"][idx].ravel()
    adv = data["adv"][idx].ravel()
    clip_term = ppo_clip_loss(lp, old, adv, hp.clip)
    value_loss = ((value - data["ret"][idx].ravel()) ** 2).mean()
    entropy = hybrid_entropy(h_c, h_d, hp.entropy_mode).mean()
    objective = total_loss(clip_term, value_loss, entropy, hp.k1, hp.k2)
    ratio = np.exp(lp.data - old)
    stats = {
        "clip_term": clip_term.item(),
        "value_loss": value_loss.item(),
        "entropy": entropy.item(),
        "max_ratio_dev": float(np.max(np.abs(ratio - 1.0))),
        "clip_frac": float(np.mean(np.abs(ratio - 1.0) > hp.clip)),
    }
    return -objective, stats


def optimize(learner: Learner, hp: TrainConfig, rng: np.random.Generator, episode: int,
             last_value: np.ndarray | None = None) -> dict:
    """Advantage estimation plus ``hp.epochs`` passes of minibatch updates.

    ``last_value`` is the critic's estimate after the final stored step; when
    given, the episode end is treated as a truncation and bootstrapped.
    """
    buf = learner.buffer
    T = len(buf)
    dones = buf.view("done").copy()
    tail = np.zeros((1, buf.value.shape[1]))
    if last_value is not None:
        tail[0] = last_value
        dones[-1] = False
    values = np.concatenate([buf.view("value"), tail])
    costs = buf.view("cost") * hp.reward_scale
    if hp.center_rewards:
        costs = costs - costs.mean()
    adv, ret = gae(costs, values, hp.gamma, hp.gae_lambda, dones)
    if hp.normalize_advantages:
        adv = normalize_advantages(adv)
    data = {"obs": buf.view("obs"), "cont": buf.view("cont"), "disc": buf.view("disc"),
            "log_prob": buf.view("log_prob"), "adv": adv, "ret": ret,
            "h0": buf.view("h0"), "c0": buf.view("c0")}
    params = learner.policy.parameters()
    first = None
    flat = {"params": learner.flat}
    for epoch in range(hp.epochs):
        perm = rng.permutation(T)
        for start in range(0, T, hp.minibatch_size):
            idx = np.sort(perm[start:start + hp.minibatch_size])
            try:
                loss, stats = _minibatch_loss(learner.policy, hp, data, idx)
                if not math.isfinite(loss.item()):
                    raise NonFiniteError("loss", "objective")
                grads = ag.grad(loss, params.values())
            except NonFiniteError as exc:
                raise TrainingDiverged(
                    f"non-finite training signal at episode {episode}, epoch {epoch}: {exc}",
                    {"episode": episode, "epoch": epoch, "where": exc.where,
                     "adv_abs_max": float(np.abs(adv).max()),
                     "ret_abs_max": float(np.abs(ret).max())}) from exc
            if first is None:
                first = dict(stats, loss=loss.item())
            g = {"params": np.concatenate([x.ravel() for x in grads])}
            if hp.max_grad_norm > 0:
                clip_grad_norm(g, hp.max_grad_norm)
            adam_update(flat, g, learner.adam)
    return {"episode": episode, "first_minibatch": first, "adv_mean": float(adv.mean()),
            "adv_std": float(adv.std())}


def train(env: EnvConfig, hp: TrainConfig, seed: int, on_episode=None) -> TrainResult:
    """Train MF-HPPO and return per-episode average costs.

    Each episode starts from a freshly sampled UAV placement over the fixed
    sensor layout for ``seed``; after it, every learner runs its optimisation
    phase, then copies its parameters into its sampling snapshot and clears
    its buffer.
    """
    rngs = streams(seed)
    learners = make_learners(env, hp, rngs["init"])
    sensors = scenario_for(env, seed)
    seeds = episode_seeds(seed, hp.episodes)
    act_rng, opt_rng = rngs["act"], rngs["opt"]
    metrics, phase_stats = [], []
    for ep in range(hp.episodes):
        t0 = time.perf_counter()
        world, obs = reset(env, int(seeds[ep]), sensors)
        for lr in learners:
            lr.sampler.reset(len(lr.agents))
        total = 0.0
        for t in range(hp.episode_length):
            actions = [None] * env.n_uavs
            step_rows = []
            for lr in learners:
                O = np.stack([obs[i].vector for i in lr.agents])
                state = lr.sampler.encoder.state if hp.use_lstm else (None, None)
                cont, disc, logp, value = lr.sampler.act(O, act_rng)
                for k, i in enumerate(lr.agents):
                    actions[i] = lr.sampler.to_action(cont[k], disc[k])
                step_rows.append((O, cont, disc, logp, value, state))
            world, obs, cost = env_step(world, actions)
            total += cost
            done = t == hp.episode_length - 1
            for lr, (O, cont, disc, logp, value, (h0, c0)) in zip(learners, step_rows):
                lr.buffer.add(O, O[:, 2 + env.n_sensors:], cont, disc, cost, logp, value, done,
                              h0, c0)
        stats = []
        for lr in learners:
            last = None
            if hp.bootstrap_final:
                O = np.stack([obs[i].vector for i in lr.agents])
                last = lr.sampler.critic_value(O)
            stats.append(optimize(lr, hp, opt_rng, ep, last))
            lr.sync()
            lr.buffer.clear()
        phase_stats.append(stats)
        m = EpisodeMetrics(ep, total / hp.episode_length, (time.perf_counter() - t0) * 1e3)
        metrics.append(m)
        if on_episode is not None:
            on_episode(m)
        if ep % 50 == 0:
            log.debug("episode %d mean cost %.3f", ep, m.mean_cost)
    return TrainResult(metrics, learners, phase_stats)


def evaluate(env: EnvConfig, learners: list, seed: int, episodes: int,
             episode_length: int) -> list[EpisodeMetrics]:
    """Play trained policies (stochastically) without learning."""
    rng = streams(seed)["act"]

    def on_reset(_):
        for lr in learners:
            lr.policy.reset(len(lr.agents))

    def choose(world, obs, t):
        actions = [None] * env.n_uavs
        for lr in learners:
            O = np.stack([obs[i].vector for i in lr.agents])
            cont, disc, _, _ = lr.policy.act(O, rng)
            for k, i in enumerate(lr.agents):
                actions[i] = lr.policy.to_action(cont[k], disc[k])
        return actions

    return run_episodes(env, seed, episodes, episode_length, choose, on_reset)
