"""Hybrid actor-critic: shared recurrent encoder, Gaussian and categorical actors, critic."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteError
from ..mmdp import EnvConfig, HybridAction
from ..neural import Dense, Lstm, Mlp, Module, autograd as ag

CONT_DIM = 3  # waypoint dx, dy and speed
# actor output layers start near zero so the first policy is centred and near uniform
HEAD_GAIN = 0.01


@dataclass(frozen=True)
class PolicySpec:
    obs_dim: int
    n_sensors: int
    offset_bound: float
    v_min: float
    v_max: float
    encoder_width: int = 256
    hidden_width: int = 256
    hidden_layers: int = 2
    use_lstm: bool = True

    @classmethod
    def for_env(cls, env: EnvConfig, **kw) -> "PolicySpec":
        return cls(env.obs_dim, env.n_sensors, env.offset_bound, env.v_min, env.v_max, **kw)

    @property
    def action_scale(self) -> np.ndarray:
        half = (self.v_max - self.v_min) / 2
        return np.array([self.offset_bound, self.offset_bound, half])

    @property
    def action_shift(self) -> np.ndarray:
        return np.array([0.0, 0.0, (self.v_max + self.v_min) / 2])


class PolicyNets(Module):
    """Encoder (LSTM, or a tanh dense layer when ``use_lstm`` is off) feeding
    a continuous actor, a discrete actor and a critic.

    The continuous mean is ``shift + scale * tanh(.)`` so it lies inside the
    action box; the log standard deviation is a free parameter vector
    initialised to ``log(scale / 2)``.
    """

    def __init__(self, spec: PolicySpec, rng: np.random.Generator, name: str = "policy"):
        super().__init__(name)
        self.spec = spec
        E, W = spec.encoder_width, spec.hidden_width
        if spec.use_lstm:
            self.encoder = Lstm(spec.obs_dim, E, name=f"{name}.lstm", rng=rng)
        else:
            self.encoder = Dense(spec.obs_dim, E, "tanh", name=f"{name}.encoder", rng=rng)
        hidden = [W] * spec.hidden_layers
        self.actor_c = Mlp([E, *hidden, CONT_DIM], "relu", "tanh", name=f"{name}.actor_c", rng=rng)
        self.actor_d = Mlp([E, *hidden, spec.n_sensors], "relu", name=f"{name}.actor_d", rng=rng)
        self.critic = Mlp([E, *hidden, 1], "relu", name=f"{name}.critic", rng=rng)
        for head in (self.actor_c, self.actor_d):
            head.layers[-1].weight.data *= HEAD_GAIN
        self.log_std = ag.parameter(np.log(0.5 * spec.action_scale), f"{name}.log_std")
        self._state = None

    def own_parameters(self):
        return {self.log_std.name: self.log_std}

    def children(self):
        return [self.encoder, self.actor_c, self.actor_d, self.critic]

    # -- heads ------------------------------------------------------------
    def heads(self, feats):
        """(mean, log_std, logits, value) for encoder features of shape (N, E)."""
        mu = self.actor_c(feats) * self.spec.action_scale + self.spec.action_shift
        logits = self.actor_d(feats)
        value = ag.reshape(self.critic(feats), (feats.shape[0],))
        return mu, self.log_std, logits, value

    def encode_sequence(self, obs_seq):
        """Encoder features for a (T, B, obs_dim) batch of episodes."""
        if self.spec.use_lstm:
            return self.encoder.sequence(obs_seq)
        return self.encoder(obs_seq)

    # -- acting -------------------------------------------------------------
    def reset(self, batch: int) -> None:
        if self.spec.use_lstm:
            self.encoder.reset_state(batch)

    def act(self, obs: np.ndarray, rng: np.random.Generator):
        """Sample actions for a batch of observations (one row per agent).

        Returns ``(raw_continuous, sensor_index, log_prob, value)``; the
        log-probability is that of the unclamped continuous sample.
        """
        obs = np.atleast_2d(obs)
        if self.spec.use_lstm:
            feats = ag.Tensor(self.encoder.step(obs))
        else:
            feats = self.encoder(obs)
        mu, log_std, logits, value = self.heads(feats)
        std = np.exp(log_std.data)
        cont = mu.data + std * rng.standard_normal(mu.shape)
        probs = ag.np_softmax(logits.data)
        u = rng.uniform(size=(probs.shape[0], 1))
        disc = np.minimum((np.cumsum(probs, axis=1) < u).sum(axis=1), probs.shape[1] - 1)
        lp_c = ag.gaussian_log_prob(cont, mu, log_std).data
        lp_d = ag.categorical_log_prob(logits, disc).data
        log_prob = lp_c + lp_d
        if not np.all(np.isfinite(log_prob)):
            raise NonFiniteError(self.name, "log-probability while acting")
        return cont, disc, log_prob, value.data.copy()

    def critic_value(self, obs: np.ndarray) -> np.ndarray:
        """Value estimates for the next observations without advancing the encoder."""
        obs = np.atleast_2d(obs)
        if self.spec.use_lstm:
            saved = self.encoder.state
            feats = ag.Tensor(self.encoder.step(obs))
            self.encoder.state = saved
        else:
            feats = self.encoder(obs)
        return self.heads(feats)[3].data.copy()

    def to_action(self, cont, sensor_index) -> HybridAction:
        lo = self.spec.action_shift - self.spec.action_scale
        hi = self.spec.action_shift + self.spec.action_scale
        c = np.clip(cont, lo, hi)
        return HybridAction(int(sensor_index), (float(c[0]), float(c[1])), float(c[2]))

    def evaluate(self, feats, cont, disc):
        """Log-probabilities, entropies and values at stored actions.

        ``feats`` is an (N, E) tensor; returns tensors
        ``(log_prob, log_prob_cont, log_prob_disc, h_cont, h_disc, value)``.
        """
        mu, log_std, logits, value = self.heads(feats)
        lp_c = ag.gaussian_log_prob(cont, mu, log_std)
        lp_d = ag.categorical_log_prob(logits, disc)
        h_c = ag.gaussian_entropy(log_std)
        h_d = ag.categorical_entropy(logits)
        return lp_c + lp_d, lp_c, lp_d, h_c, h_d, value


def sample_action(policy: PolicyNets, observation, rng: np.random.Generator):
    """Sample one agent's hybrid action from its observation.

    ``observation`` is an :class:`~uavaoi.mmdp.Observation` (whose vector
    already carries the mean-field block) or a bare feature vector. For an
    LSTM policy the encoder state advances by one step.
    """
    vec = getattr(observation, "vector", observation)
    cont, disc, log_prob, value = policy.act(np.asarray(vec)[None, :], rng)
    return policy.to_action(cont[0], disc[0]), float(log_prob[0]), float(value[0])
