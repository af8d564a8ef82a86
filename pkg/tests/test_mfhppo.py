import importlib
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uavaoi.channel import ChannelParams
from uavaoi.errors import ConfigError, TrainingDiverged
from uavaoi.mfhppo import (
    PolicyNets,
    PolicySpec,
    RolloutBuffer,
    TrainConfig,
    clip_bound,
    clipped_surrogate,
    gae,
    hybrid_entropy,
    normalize_advantages,
    ppo_clip_loss,
    sample_action,
    total_loss,
    train,
)
from uavaoi.mmdp import EnvConfig, reset
from uavaoi.neural import autograd as ag

train_mod = importlib.import_module("uavaoi.mfhppo.train")

SMALL_ENV = EnvConfig(n_uavs=2, n_sensors=3, channel=ChannelParams(mode="always-succeed"))
SMALL_HP = dict(encoder_width=8, hidden_width=8, hidden_layers=1, episode_length=6,
                buffer_size=6, episodes=3)


def _spec(**kw):
    base = dict(obs_dim=8, n_sensors=3, offset_bound=15.0, v_min=0.0, v_max=15.0,
                encoder_width=6, hidden_width=6, hidden_layers=1)
    base.update(kw)
    return PolicySpec(**base)


# -- clip objective -----------------------------------------------------------------

def _expected(r, a, eps):
    if a > 0:
        return (1 + eps) * a if r > 1 + eps else r * a
    if a < 0:
        return (1 - eps) * a if r < 1 - eps else r * a
    return 0.0


@pytest.mark.parametrize("eps", [0.1, 0.2, 0.3])
@pytest.mark.parametrize("a", [1.7, -1.7, 0.0])
@pytest.mark.parametrize("regime", ["below", "inside", "above"])
def test_clip_branch_table(regime, a, eps):
    r = {"below": 1 - eps - 0.25, "inside": 1 + 0.5 * eps, "above": 1 + eps + 0.6}[regime]
    got = float(clipped_surrogate(np.array([r]), np.array([a]), eps)[0])
    assert got == _expected(r, a, eps)


def test_clip_named_examples():
    A = 2.5
    assert ppo_clip_loss([0.0], [0.0], [A], 0.2) == A
    assert float(clipped_surrogate(np.array([2.0]), np.array([A]), 0.2)[0]) == 1.2 * A
    assert float(clipped_surrogate(np.array([0.5]), np.array([-A]), 0.2)[0]) == 0.8 * -A


def test_clip_bound_branches():
    np.testing.assert_array_equal(clip_bound([2.0, -2.0, 0.0], 0.25), [2.5, -1.5, 0.0])


@settings(max_examples=100)
@given(st.floats(0.05, 0.5), st.floats(0.1, 5), st.booleans())
def test_clip_constant_on_clipped_side(eps, mag, positive):
    a = mag if positive else -mag
    grid = (np.linspace(1 + eps, 3, 20) if positive else np.linspace(0.0, 1 - eps, 20))
    vals = clipped_surrogate(grid, np.full(20, a), eps)
    np.testing.assert_array_equal(vals, np.full(20, vals[0]))


def test_clip_rejects_nonpositive_epsilon():
    with pytest.raises(ValueError):
        ppo_clip_loss([0.0], [0.0], [1.0], 0.0)


def test_clip_tensor_and_array_paths_agree():
    rng = np.random.default_rng(0)
    new, old, adv = rng.normal(size=20), rng.normal(size=20), rng.normal(size=20)
    t = ppo_clip_loss(ag.parameter(new, "lp"), old, adv, 0.2).item()
    assert t == pytest.approx(ppo_clip_loss(new, old, adv, 0.2), rel=1e-12)


# -- GAE --------------------------------------------------------------------------------

def test_gae_hand_recursion():
    costs = -np.ones(3)  # rewards [1, 1, 1]
    values = np.array([0.5, 0.5, 0.5, 0.0])
    adv, ret = gae(costs, values, 0.9, 0.5)
    d2 = 1 + 0.9 * 0.0 - 0.5
    d1 = 1 + 0.9 * 0.5 - 0.5
    d0 = d1
    a2 = d2
    a1 = d1 + 0.45 * a2
    a0 = d0 + 0.45 * a1
    np.testing.assert_allclose(adv, [a0, a1, a2], rtol=0, atol=1e-15)
    np.testing.assert_allclose(ret, adv + 0.5, atol=1e-15)


def test_gae_lambda_one_is_return_minus_value():
    rng = np.random.default_rng(1)
    costs, values, g = rng.normal(size=6), rng.normal(size=7), 0.8
    adv, _ = gae(costs, values, g, 1.0)
    rewards = -costs
    G = values[-1]
    expected = np.zeros(6)
    for t in range(5, -1, -1):
        G = rewards[t] + g * G
        expected[t] = G - values[t]
    np.testing.assert_allclose(adv, expected, atol=1e-12)


def test_gae_lambda_zero_is_td_residual():
    rng = np.random.default_rng(2)
    costs, values = rng.normal(size=5), rng.normal(size=6)
    adv, _ = gae(costs, values, 0.95, 0.0)
    np.testing.assert_allclose(adv, -costs + 0.95 * values[1:] - values[:-1], atol=1e-15)


def test_gae_does_not_bootstrap_across_done():
    costs = np.array([1.0, 1.0, 1.0, 1.0])
    values = np.array([0.0, 9.0, 0.0, 0.0, 100.0])
    dones = np.array([False, True, False, True])
    adv, _ = gae(costs, values, 0.9, 0.9, dones)
    assert adv[1] == pytest.approx(-1.0 - 9.0)
    assert adv[3] == pytest.approx(-1.0)


def test_gae_per_agent_columns():
    costs = np.array([1.0, 2.0])
    values = np.array([[0.0, 1.0], [0.5, 0.0], [0.0, 0.0]])
    adv, _ = gae(costs, values, 0.9, 0.8)
    for k in range(2):
        col, _ = gae(costs, values[:, k], 0.9, 0.8)
        np.testing.assert_allclose(adv[:, k], col)


def test_gae_validation():
    with pytest.raises(ValueError):
        gae([1.0], [0.0, 0.0], 1.5, 0.9)
    with pytest.raises(ValueError):
        gae([1.0, 2.0], [0.0, 0.0], 0.9, 0.9)


@given(st.lists(st.floats(-100, 100), min_size=2, max_size=60))
def test_advantage_normalization(values):
    a = np.array(values)
    if np.ptp(a) < 1e-3:
        return
    n = normalize_advantages(a)
    assert abs(n.mean()) < 1e-6
    assert 0.99 <= n.std() <= 1.01


# -- entropy and total objective ----------------------------------------------------------------

def test_product_and_sum_entropy():
    assert hybrid_entropy(2.0, 0.5) == 1.0
    assert hybrid_entropy(2.0, 0.5, "sum") == 2.5
    with pytest.raises(ValueError):
        hybrid_entropy(1.0, 1.0, "max")


def test_total_loss_defaults_and_k2_zero():
    assert TrainConfig().k1 == 0.2 and TrainConfig().k2 == 3.0
    assert total_loss(1.0, 2.0, 0.5) == 1.0 - 0.2 * 2.0 + 3.0 * 0.5
    assert total_loss(1.0, 2.0, 0.5, k2=0.0) == total_loss(1.0, 2.0, 99.0, k2=0.0)


def test_table_defaults():
    hp = TrainConfig()
    assert (hp.episodes, hp.episode_length, hp.epochs, hp.buffer_size, hp.minibatch_size) == \
        (3000, 40, 8, 40, 4)
    assert (hp.gamma, hp.clip, hp.lr) == (0.99, 0.2, 3e-4)


@pytest.mark.parametrize("kw", [{"clip": 0.0}, {"buffer_size": 10}, {"entropy_mode": "max"},
                                {"recurrence": "none"}, {"epochs": 0}])
def test_train_config_validation(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


# -- sampling --------------------------------------------------------------------------

@pytest.mark.parametrize("use_lstm", [True, False])
def test_hybrid_log_prob_is_additive(use_lstm):
    net = PolicyNets(_spec(use_lstm=use_lstm), np.random.default_rng(0))
    net.reset(4)
    obs = np.random.default_rng(1).normal(size=(4, 8))
    feats = net.encoder(obs) if not use_lstm else ag.Tensor(net.encoder.sequence(obs[None])
                                                              .data[0])
    cont, disc, lp, _ = net.act(obs, np.random.default_rng(2))
    total, lp_c, lp_d, *_ = net.evaluate(feats, cont, disc)
    np.testing.assert_allclose(total.data, lp_c.data + lp_d.data, rtol=0, atol=0)
    np.testing.assert_allclose(lp, total.data, atol=1e-12)


def test_extreme_logits_pick_first_sensor():
    net = PolicyNets(_spec(use_lstm=False, n_sensors=2), np.random.default_rng(0))
    last = net.actor_d.layers[-1]
    last.weight.data[...] = 0.0
    last.bias.data[...] = [50.0, -50.0]
    rng = np.random.default_rng(3)
    picks = [net.act(np.zeros((1, 8)), rng)[1][0] for _ in range(10_000)]
    assert np.mean(np.array(picks) == 0) == 1.0


@pytest.mark.parametrize("use_lstm", [True, False])
def test_fresh_policy_is_centred_and_near_uniform(use_lstm):
    spec = _spec(use_lstm=use_lstm)
    net = PolicyNets(spec, np.random.default_rng(0))
    obs = np.random.default_rng(4).uniform(size=(16, 8))
    feats = net.encoder(obs) if not use_lstm else ag.Tensor(net.encoder.sequence(obs[None])
                                                              .data[0])
    mu, _, logits, _ = net.heads(feats)
    centre_gap = np.abs(mu.data - spec.action_shift) / spec.action_scale
    assert centre_gap.max() < 0.05
    probs = ag.np_softmax(logits.data)
    assert np.abs(probs * spec.n_sensors - 1).max() < 0.05


def test_standard_gaussian_density_at_mean():
    lp = ag.gaussian_log_prob(np.zeros((1, 3)), np.zeros((1, 3)), ag.Tensor(np.zeros(3))).item()
    assert lp == pytest.approx(-0.5 * 3 * math.log(2 * math.pi), abs=1e-15)


def test_sample_action_clamps_but_scores_raw_sample():
    env = EnvConfig(n_uavs=1, n_sensors=3)
    net = PolicyNets(PolicySpec.for_env(env, encoder_width=4, hidden_width=4, hidden_layers=1),
                     np.random.default_rng(0))
    net.log_std.data[...] = 5.0  # very wide, so clamping is almost certain
    net.reset(1)
    _, obs = reset(env, 0)
    action, lp, value = sample_action(net, obs[0], np.random.default_rng(1))
    assert abs(action.waypoint_offset[0]) <= env.offset_bound
    assert env.v_min <= action.speed <= env.v_max
    assert math.isfinite(lp) and math.isfinite(value)


# -- buffer ------------------------------------------------------------------------------

def test_buffer_capacity_and_clear():
    buf = RolloutBuffer(2, 1, 3, 1)
    row = (np.zeros((1, 3)), np.zeros((1, 1)), np.zeros((1, 3)), [0], 1.0, [0.0], [0.0], False)
    buf.add(*row)
    buf.add(*row)
    assert buf.full and len(buf) == 2
    with pytest.raises(OverflowError):
        buf.add(*row)
    buf.clear()
    assert len(buf) == 0


# -- training loop -----------------------------------------------------------------------

def test_smoke_single_step(monkeypatch):
    seen = []
    real = train_mod.optimize

    def spy(learner, hp, rng, episode, last_value=None):
        seen.append((len(learner.buffer), learner.buffer.view("obs").shape))
        return real(learner, hp, rng, episode, last_value)

    monkeypatch.setattr(train_mod, "optimize", spy)
    hp = TrainConfig(**dict(SMALL_HP, episodes=1, episode_length=1, buffer_size=1))
    res = train(SMALL_ENV, hp, 0)
    assert seen == [(1, (1, 2, SMALL_ENV.obs_dim))]
    assert [lr.syncs for lr in res.learners] == [1]
    assert len(res.metrics) == 1


@pytest.mark.parametrize("kw", [{"use_lstm": True}, {"use_lstm": False},
                                {"use_lstm": True, "recurrence": "full-prefix"},
                                {"share_params": False}])
def test_ratio_is_one_right_after_sync(kw):
    hp = TrainConfig(**dict(SMALL_HP, **kw))
    res = train(SMALL_ENV, hp, 1)
    for stats in res.phase_stats:
        for s in stats:
            assert s["first_minibatch"]["max_ratio_dev"] < 1e-6
            assert s["first_minibatch"]["clip_frac"] == 0.0
    assert all(lr.syncs == hp.episodes for lr in res.learners)


def test_independent_networks_per_agent():
    res = train(SMALL_ENV, TrainConfig(**dict(SMALL_HP, share_params=False)), 0)
    assert [lr.agents for lr in res.learners] == [[0], [1]]
    a, b = (lr.policy.state_dict() for lr in res.learners)
    assert any(not np.array_equal(a[k], b[k]) for k in a)


def test_training_is_deterministic():
    hp = TrainConfig(**SMALL_HP)
    a, b = train(SMALL_ENV, hp, 4), train(SMALL_ENV, hp, 4)
    np.testing.assert_array_equal(a.costs, b.costs)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_guard_reports_diagnostics():
    hp = TrainConfig(**dict(SMALL_HP, episodes=1, reward_scale=1e308))
    with pytest.raises(TrainingDiverged) as info:
        train(SMALL_ENV, hp, 0)
    assert info.value.diagnostics["episode"] == 0
