import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from uavaoi.errors import ContractViolation
from uavaoi.world import (
    Bounds,
    SensorState,
    UavState,
    WorldState,
    advance_aoi,
    average_aoi,
    clamp_speed,
    step_kinematics,
)


def _world(aois, dt=1.0):
    sensors = tuple(SensorState(j, np.array([float(j), 0.0]), a) for j, a in enumerate(aois))
    uav = UavState(0, np.array([0.0, 0.0]), np.zeros(2), 120.0)
    return WorldState(0.0, 0, (uav,), sensors, np.random.default_rng(0), dt, 0.0, Bounds(),
                      0.0, 15.0)


# -- clamp_speed --------------------------------------------------------------

@pytest.mark.parametrize("v, expected", [
    ((20.0, 0.0), (15.0, 0.0)),
    ((3.0, 4.0), (3.0, 4.0)),
    ((0.0, 0.0), (0.0, 0.0)),
])
def test_clamp_speed_examples(v, expected):
    np.testing.assert_allclose(clamp_speed(np.array(v), 0.0, 15.0), expected, atol=1e-12)


def test_clamp_speed_raises_minimum():
    out = clamp_speed(np.array([0.3, 0.4]), 2.0, 15.0)
    np.testing.assert_allclose(out, [1.2, 1.6])


def test_clamp_speed_rejects_bad_bounds():
    with pytest.raises(ContractViolation):
        clamp_speed(np.array([1.0, 0.0]), 5.0, 5.0)


@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4), st.floats(0, 10), st.floats(0.1, 30))
@settings(max_examples=300, deadline=None)
def test_clamp_speed_bounds_and_direction(vx, vy, v_min, span):
    v_max = v_min + span
    v = np.array([vx, vy])
    out = clamp_speed(v, v_min, v_max)
    n = np.hypot(*out)
    if np.hypot(vx, vy) == 0:
        assert n == 0
        return
    assert v_min - 1e-12 <= n <= v_max + 1e-12
    # same direction: parallel and not reversed
    assert abs(out[0] * vy - out[1] * vx) <= 1e-9 * max(1.0, np.hypot(vx, vy) * n)
    assert out @ v >= 0


# -- step_kinematics ----------------------------------------------------------

def test_noiseless_euler_step():
    uav = UavState(0, np.array([0.0, 0.0]), np.zeros(2), 120.0)
    out = step_kinematics(uav, np.array([1.0, 0.0]), 1.0, 0.0, np.zeros(2))
    np.testing.assert_allclose(out.position, [1.0, 0.0])
    np.testing.assert_allclose(out.velocity, [1.0, 0.0])
    assert out.altitude == 120.0


def test_zero_velocity_is_identity():
    uav = UavState(0, np.array([5.0, 5.0]), np.zeros(2), 120.0)
    out = step_kinematics(uav, np.zeros(2), 1.0, 0.0, np.zeros(2))
    np.testing.assert_allclose(out.position, [5.0, 5.0])


def test_diffusion_term_arithmetic():
    uav = UavState(0, np.array([0.0, 0.0]), np.zeros(2), 120.0)
    out = step_kinematics(uav, np.array([1.0, 0.0]), 1.0, 2.0, np.array([0.5, -0.5]))
    np.testing.assert_allclose(out.position, [2.0, -1.0])


def test_positions_clamped_to_bounds():
    uav = UavState(0, np.array([195.0, 5.0]), np.zeros(2), 120.0)
    out = step_kinematics(uav, np.array([15.0, -15.0]), 1.0, 0.0, np.zeros(2), Bounds())
    np.testing.assert_allclose(out.position, [200.0, 0.0])


def test_wiener_increment_is_zero_mean():
    rng = np.random.default_rng(7)
    n, dt, sigma = 10_000, 1.0, 3.0
    v = np.array([2.0, -1.0])
    uav = UavState(0, np.zeros(2), np.zeros(2), 120.0)
    incs = np.empty((n, 2))
    for k in range(n):
        out = step_kinematics(uav, v, dt, sigma, rng.standard_normal(2))
        incs[k] = out.position - uav.position - v * dt
    bound = 4 * sigma * math.sqrt(dt / n)
    assert np.all(np.abs(incs.mean(axis=0)) <= bound)


def test_sigma_zero_is_deterministic():
    cmds = np.random.default_rng(1).uniform(-10, 10, size=(30, 2))

    def fly():
        u = UavState(0, np.array([100.0, 100.0]), np.zeros(2), 120.0)
        path = []
        for c in cmds:
            u = step_kinematics(u, clamp_speed(c), 1.0, 0.0, np.zeros(2), Bounds())
            path.append(u.position.copy())
        return np.array(path)

    assert np.array_equal(fly(), fly())


# -- AoI ----------------------------------------------------------------------

def test_aoi_growth_and_reset():
    sensors = (SensorState(0, np.zeros(2), 3.0), SensorState(1, np.zeros(2), 9.0))
    out = advance_aoi(sensors, {1}, 1.0)
    assert [s.aoi for s in out] == [4.0, 1.0]


def test_aoi_double_service_is_idempotent():
    sensors = (SensorState(0, np.zeros(2), 9.0),)
    once = advance_aoi(sensors, [0], 1.0)
    twice = advance_aoi(sensors, [0, 0], 1.0)
    assert once[0].aoi == twice[0].aoi == 1.0


def test_aoi_unknown_sensor_rejected():
    with pytest.raises(ContractViolation):
        advance_aoi((SensorState(0, np.zeros(2), 1.0),), {5}, 1.0)


@pytest.mark.parametrize("aois, expected", [([2, 4], 3.0), ([7], 7.0), ([2.5] * 6, 2.5)])
def test_average_aoi(aois, expected):
    assert average_aoi(_world([float(a) for a in aois])) == pytest.approx(expected)


def test_average_aoi_needs_sensors():
    with pytest.raises(ContractViolation):
        average_aoi(_world([]))


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=20), st.floats(0.01, 5))
def test_idle_step_adds_dt_to_average(aois, dt):
    w = _world(aois, dt)
    before = average_aoi(w)
    after = np.mean([s.aoi for s in advance_aoi(w.sensors, set(), dt)])
    assert after == pytest.approx(before + dt, rel=1e-12, abs=1e-9)
