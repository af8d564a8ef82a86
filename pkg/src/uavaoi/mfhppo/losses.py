"""PPO-clip surrogate, GAE and the combined actor-critic objective."""
from __future__ import annotations

import numpy as np

from ..neural import autograd as ag

PRODUCT = "product"
SUM = "sum"


def clip_bound(advantage, epsilon):
    """``(1 + eps) A`` where ``A >= 0`` and ``(1 - eps) A`` where ``A < 0``."""
    a = np.asarray(advantage, dtype=float)
    return np.where(a >= 0, (1.0 + epsilon) * a, (1.0 - epsilon) * a)


def clipped_surrogate(ratio, advantage, epsilon):
    """Per-sample ``min(r A, g(eps, A))``. Accepts arrays or a ratio tensor."""
    bound = clip_bound(advantage, epsilon)
    if isinstance(ratio, ag.Tensor):
        return ag.minimum(ratio * np.asarray(advantage, dtype=float), bound)
    r = np.asarray(ratio, dtype=float)
    return np.minimum(r * np.asarray(advantage, dtype=float), bound)


def ppo_clip_loss(log_prob_new, log_prob_old, advantage, epsilon):
    """Mean clipped surrogate over a minibatch (an objective to maximise)."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    old = np.asarray(log_prob_old, dtype=float)
    if isinstance(log_prob_new, ag.Tensor):
        ratio = ag.exp(log_prob_new - old)
        return clipped_surrogate(ratio, advantage, epsilon).mean()
    ratio = np.exp(np.asarray(log_prob_new, dtype=float) - old)
    return float(np.mean(clipped_surrogate(ratio, advantage, epsilon)))


def hybrid_entropy(h_cont, h_disc, mode: str = PRODUCT):
    """Combine continuous and discrete entropies by product (default) or sum."""
    if mode == PRODUCT:
        return h_cont * h_disc
    if mode == SUM:
        return h_cont + h_disc
    raise ValueError(f"unknown entropy mode {mode!r}")


def total_loss(clip_term, value_loss, entropy, k1: float = 0.2, k2: float = 3.0):
    """Objective ``L_clip - K1 L_VF + K2 H``; training minimises its negative."""
    return clip_term - k1 * value_loss + k2 * entropy


def gae(costs, values, gamma: float, lam: float, dones=None):
    """Generalised advantage estimates for a cost sequence.

    ``values`` has one more entry than ``costs``: the bootstrap value after
    the last step. ``dones[t]`` marks an episode ending after step ``t``; the
    recursion does not bootstrap across it. Rewards are ``-costs``.
    Returns ``(advantages, returns)`` with ``returns = advantages + values[:-1]``.
    Extra trailing axes (one column per agent) are handled elementwise.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    rewards = -np.asarray(costs, dtype=float)
    values = np.asarray(values, dtype=float)
    T = rewards.shape[0]
    if values.shape[0] != T + 1:
        raise ValueError(f"need {T + 1} values for {T} costs, got {values.shape[0]}")
    dones = np.zeros(T, dtype=bool) if dones is None else np.asarray(dones, dtype=bool)
    # a shared cost column broadcasts against per-agent value columns
    rewards = rewards.reshape(rewards.shape + (1,) * (values.ndim - rewards.ndim))
    adv = np.zeros(np.broadcast_shapes(rewards.shape, values[:-1].shape))
    last = np.zeros(adv.shape[1:])
    for t in range(T - 1, -1, -1):
        live = 0.0 if dones[t] else 1.0
        delta = rewards[t] + gamma * values[t + 1] * live - values[t]
        last = delta + gamma * lam * live * last
        adv[t] = last
    return adv, adv + values[:-1]


def normalize_advantages(adv, eps: float = 1e-8):
    adv = np.asarray(adv, dtype=float)
    return (adv - adv.mean()) / (adv.std() + eps)
