import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uavaoi.baselines import namas_policy, namas_velocity, rstd_policy, run_namas, run_rstd
from uavaoi.baselines.madqn import (
    DqnAgent,
    DqnConfig,
    ReplayBuffer,
    circle_layout,
    circle_point,
    circle_step,
    madqn_train,
    select_action,
)
from uavaoi.channel import ChannelParams
from uavaoi.errors import ConfigError
from uavaoi.mmdp import EnvConfig, reset
from uavaoi.world import SensorState

ENV = EnvConfig(n_uavs=3, n_sensors=5)


def _with_aois(world, aois):
    return replace(world, sensors=tuple(SensorState(s.id, s.position, float(a))
                                        for s, a in zip(world.sensors, aois)))


# -- RSTD ---------------------------------------------------------------------------

def test_rstd_same_seed_same_actions():
    w, _ = reset(ENV, 0)
    a = [rstd_policy(w, 0, r) for r in [np.random.default_rng(3)] for _ in range(20)]
    b = [rstd_policy(w, 0, r) for r in [np.random.default_rng(3)] for _ in range(20)]
    assert a == b


def test_rstd_bounds_and_frequencies():
    J = 5
    w, _ = reset(ENV, 0)
    rng = np.random.default_rng(11)
    n = 10_000
    picks = np.zeros(J)
    for _ in range(n):
        a = rstd_policy(w, 0, rng)
        assert 0 <= a.sensor_index < J
        assert max(abs(a.waypoint_offset[0]), abs(a.waypoint_offset[1])) <= ENV.offset_bound
        assert ENV.v_min <= a.speed <= ENV.v_max
        picks[a.sensor_index] += 1
    tol = 4 * math.sqrt(J) / math.sqrt(n * J)
    assert np.all(np.abs(picks / n - 1 / J) <= tol)


# -- NAMAS -------------------------------------------------------------------------

def test_namas_picks_max_aoi():
    env = EnvConfig(n_uavs=1, n_sensors=3)
    w, _ = reset(env, 0)
    assert namas_policy(_with_aois(w, (1, 5, 2)), 0).sensor_index == 1


def test_namas_ties_go_to_lowest_index():
    env = EnvConfig(n_uavs=1, n_sensors=4)
    w, _ = reset(env, 0)
    assert namas_policy(_with_aois(w, (3, 3, 3, 3)), 0).sensor_index == 0


def test_namas_velocity_is_unit_vector_times_vmax():
    env = EnvConfig(n_uavs=1, n_sensors=1)
    w, _ = reset(env, 0, np.array([[3.0, 4.0]]))
    w = replace(w, uavs=(replace(w.uavs[0], position=np.array([0.0, 0.0])),))
    np.testing.assert_allclose(namas_velocity(w, 0), [9.0, 12.0])


def test_namas_far_target_keeps_heading():
    env = EnvConfig(n_uavs=1, n_sensors=1)
    w, _ = reset(env, 0, np.array([[150.0, 200.0]]))
    w = replace(w, uavs=(replace(w.uavs[0], position=np.array([0.0, 0.0])),))
    off = namas_policy(w, 0).waypoint_offset
    assert off[0] / off[1] == pytest.approx(0.75)
    assert max(abs(v) for v in off) <= env.offset_bound


def test_namas_radius_restricts_candidates():
    env = EnvConfig(n_uavs=1, n_sensors=2)
    w, _ = reset(env, 0, np.array([[10.0, 0.0], [190.0, 0.0]]))
    w = replace(w, uavs=(replace(w.uavs[0], position=np.array([0.0, 0.0])),))
    w = _with_aois(w, (1, 9))
    assert namas_policy(w, 0).sensor_index == 1
    assert namas_policy(w, 0, radius=50.0).sensor_index == 0


def test_namas_is_deterministic():
    a = [m.mean_cost for m in run_namas(ENV, 2, 3, 10)]
    b = [m.mean_cost for m in run_namas(ENV, 2, 3, 10)]
    assert a == b


def test_baseline_metrics_shape():
    for m in run_rstd(ENV, 0, 2, 5):
        assert math.isfinite(m.mean_cost) and m.mean_cost >= 1.0


# -- MADQN -------------------------------------------------------------------------

def test_epsilon_one_is_uniform():
    rng = np.random.default_rng(0)
    q = np.array([5.0, 0.0, 0.0, 0.0])
    counts = np.bincount([select_action(q, 1.0, rng) for _ in range(10_000)], minlength=4)
    assert np.all(np.abs(counts / 10_000 - 0.25) <= 4 * math.sqrt(0.25 * 0.75 / 10_000))


def test_epsilon_zero_is_greedy():
    rng = np.random.default_rng(0)
    q = np.array([0.1, 0.7, -2.0])
    assert {select_action(q, 0.0, rng) for _ in range(500)} == {1}


def test_epsilon_schedule():
    cfg = DqnConfig(epsilon_decay_episodes=10)
    assert cfg.epsilon(0) == 1.0
    assert cfg.epsilon(5) == pytest.approx(0.525)
    assert cfg.epsilon(50) == cfg.epsilon_end


@pytest.mark.parametrize("kw", [{"epsilon_start": 1.5}, {"speed_levels": ()},
                                {"radius": -1.0}, {"batch_size": 0}])
def test_dqn_config_validation(kw):
    with pytest.raises(ConfigError):
        DqnConfig(**kw)


def test_speed_levels_must_fit_env():
    with pytest.raises(ConfigError):
        DqnConfig(speed_levels=(5.0, 20.0)).validate_for(ENV)


def test_overfit_one_batch():
    rng = np.random.default_rng(0)
    agent = DqnAgent(6, 4, DqnConfig(lr=1e-3), rng)
    batch = {"obs": rng.normal(size=(32, 6)), "action": rng.integers(0, 4, 32),
             "reward": rng.normal(size=32), "next_obs": rng.normal(size=(32, 6)),
             "done": np.zeros(32, dtype=bool)}
    targets = agent.td_targets(batch)  # frozen, so the problem is plain regression
    first = agent.td_loss(batch, targets).item()
    for _ in range(200):
        agent.train_step(batch, targets)
    assert agent.td_loss(batch, targets).item() < 0.1 * first


def test_replay_buffer_ring():
    buf = ReplayBuffer(3, 1)
    for k in range(5):
        buf.add([k], k, float(k), [k + 1], False)
    assert len(buf) == 3
    assert sorted(buf.action.tolist()) == [2, 3, 4]


def test_circle_layout_grid():
    centers, radius = circle_layout(ENV, 4)
    np.testing.assert_allclose(centers, [[50, 50], [150, 50], [50, 150], [150, 150]])
    assert radius == 25.0


@settings(max_examples=20, deadline=None)
@given(st.lists(st.sampled_from([5.0, 10.0, 15.0]), min_size=3, max_size=3),
       st.integers(0, 1000))
def test_positions_stay_on_circles(speeds, seed):
    centers, radius = circle_layout(ENV)
    w, _ = reset(ENV, seed)
    angles = np.random.default_rng(seed).uniform(0, 2 * math.pi, 3)
    w = replace(w, uavs=tuple(replace(u, position=circle_point(c, radius, a))
                              for u, c, a in zip(w.uavs, centers, angles)))
    for _ in range(60):
        w, angles, _ = circle_step(w, angles, speeds, [0, 1, 2], centers, radius)
        d = np.hypot(*(w.uav_positions() - centers).T)
        np.testing.assert_allclose(d, radius, rtol=0, atol=1e-9)


def test_madqn_smoke_is_deterministic():
    env = EnvConfig(n_uavs=2, n_sensors=3, channel=ChannelParams(mode="threshold",
                                                                 loss_threshold=90.0))
    cfg = DqnConfig(episodes=3, episode_length=8, warmup=8, batch_size=4, hidden=(8,))
    a, b = madqn_train(env, cfg, 1), madqn_train(env, cfg, 1)
    assert len(a.metrics) == 3
    np.testing.assert_array_equal(a.costs, b.costs)
    assert all(ag.updates > 0 for ag in a.agents)
