import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gradcheck import ARCHITECTURES, max_relative_error
from uavaoi.errors import ContractViolation, NonFiniteError
from uavaoi.neural import (
    AdamState,
    Dense,
    Lstm,
    Mlp,
    adam_update,
    autograd as ag,
    clip_grad_norm,
    dense_forward,
    gradients,
    grad,
    load_checkpoint,
    lstm_step,
    save_checkpoint,
)
from uavaoi.neural.checkpoint import dump_params, load_params


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


# -- dense ----------------------------------------------------------------------

def test_dense_identity_weights():
    layer = Dense(3, 3)
    layer.weight.data[...] = np.eye(3)
    x = np.array([[1.0, -2.0, 0.5]])
    np.testing.assert_array_equal(dense_forward(layer, x), x)


def test_dense_zero_weights_give_activation_of_bias():
    layer = Dense(4, 2, "tanh")
    layer.weight.data[...] = 0.0
    layer.bias.data[...] = [0.3, -1.0]
    np.testing.assert_allclose(dense_forward(layer, np.ones((1, 4))), [[math.tanh(0.3), math.tanh(-1.0)]])


def test_relu_elementwise():
    layer = Dense(2, 2, "relu")
    layer.weight.data[...] = np.eye(2)
    np.testing.assert_array_equal(dense_forward(layer, np.array([[-1.0, 2.0]])), [[0.0, 2.0]])


def test_softmax_layer_sums_to_one():
    layer = Dense(3, 5, "softmax", rng=np.random.default_rng(0))
    out = dense_forward(layer, np.random.default_rng(1).normal(size=(4, 3)))
    np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)


def test_dense_shape_mismatch():
    with pytest.raises(ContractViolation):
        Dense(3, 2)(np.ones((1, 4)))
    with pytest.raises(ContractViolation):
        Dense(3, 2, "swish")


@given(st.lists(st.floats(-50, 50), min_size=2, max_size=10), st.floats(-100, 100))
def test_softmax_normalized_and_shift_invariant(logits, shift):
    z = np.array(logits)
    p = ag.np_softmax(z)
    assert abs(p.sum() - 1.0) <= 1e-9
    np.testing.assert_allclose(ag.np_softmax(z + shift), p, atol=1e-12)


def test_fan_in_initialisation_bounds():
    layer = Dense(16, 8, rng=np.random.default_rng(0))
    assert np.all(np.abs(layer.weight.data) <= 1 / 4)
    assert not layer.bias.data.any()


# -- LSTM -----------------------------------------------------------------------

def test_lstm_zero_parameters():
    lstm = Lstm(2, 3)
    for p in lstm.parameters().values():
        p.data[...] = 0.0
    lstm.reset_state(1)
    h = lstm_step(lstm, np.array([[0.7, -0.2]]))
    assert not h.any() and not lstm.state[1].any()


def test_lstm_forget_saturation_erases_memory():
    lstm = Lstm(1, 1)
    for p in lstm.parameters().values():
        p.data[...] = 0.0
    lstm.e_f.data[...] = -1e3
    lstm.state = (np.zeros((1, 1)), np.array([[5.0]]))
    lstm_step(lstm, np.array([[1.0]]))
    # input gate 0.5, candidate tanh(0) = 0; the old cell value is gone
    assert abs(lstm.state[1][0, 0]) < 1e-12


def test_lstm_single_unit_scalar_oracle():
    lstm = Lstm(1, 1)
    for p in lstm.parameters().values():
        p.data[...] = 0.1
    lstm.reset_state(1)
    h1 = lstm_step(lstm, np.array([[1.0]]))[0, 0]
    h2 = lstm_step(lstm, np.array([[1.0]]))[0, 0]

    def scalar(h, c, a):
        f = _sig(0.1 * h + 0.1 * c + 0.1 * a + 0.1)
        p = _sig(0.1 * h + 0.1 * c + 0.1 * a + 0.1)
        c_new = f * c + p * math.tanh(0.1 * h + 0.1 * a + 0.1)
        o = _sig(0.1 * c_new + 0.1 * h + 0.1 * a + 0.1)
        return o * math.tanh(c_new), c_new

    e1, c1 = scalar(0.0, 0.0, 1.0)
    e2, _ = scalar(e1, c1, 1.0)
    assert h1 == pytest.approx(e1, abs=1e-12)
    assert h2 == pytest.approx(e2, abs=1e-12)


def test_lstm_step_matches_sequence_bitwise():
    rng = np.random.default_rng(4)
    lstm = Lstm(3, 5, rng=rng)
    xs = rng.normal(size=(6, 2, 3))
    seq = lstm.sequence(xs).data
    lstm.reset_state(2)
    steps = np.stack([lstm.step(x) for x in xs])
    assert np.array_equal(seq, steps)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.1, 20))
def test_lstm_hidden_stays_in_unit_interval(seed, scale):
    rng = np.random.default_rng(seed)
    lstm = Lstm(2, 3, rng=rng)
    for p in lstm.parameters().values():
        p.data *= scale
    h = lstm.sequence(rng.normal(scale=scale, size=(8, 1, 2))).data
    assert np.all(np.abs(h) <= 1.0)


def test_lstm_shape_mismatch():
    lstm = Lstm(3, 2)
    with pytest.raises(ContractViolation):
        lstm.step(np.ones((1, 4)))
    with pytest.raises(ContractViolation):
        lstm.sequence(np.ones((2, 3)))


# -- gradients --------------------------------------------------------------------

def test_squared_error_gradient():
    x = ag.parameter([1.0, -2.0, 3.0], "x")
    t = np.array([0.5, 0.5, 0.5])
    (g,) = grad(((x - t) ** 2).sum(), [x])
    np.testing.assert_allclose(g, 2 * (x.data - t))


def test_constant_loss_has_zero_gradient():
    net = Mlp([2, 3, 1], rng=np.random.default_rng(0))
    g = gradients(net, lambda m, _: ag.as_tensor(4.0), None)
    assert all(not v.any() for v in g.values())


@pytest.mark.parametrize("arch", sorted(ARCHITECTURES))
@pytest.mark.parametrize("seed", range(5))
def test_finite_difference_agreement(arch, seed):
    loss, params = ARCHITECTURES[arch](seed)
    assert max_relative_error(loss, params) < 1e-4


def test_non_finite_forward_names_layer():
    layer = Dense(1, 1, name="blowup")
    layer.weight.data[...] = np.inf
    with pytest.raises(NonFiniteError) as info:
        layer(np.ones((1, 1)))
    assert "blowup" in str(info.value.where)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_backward_is_reported():
    x = ag.parameter([0.0], "x")
    with pytest.raises(NonFiniteError):
        grad(ag.power(x, 0.5).sum(), [x])


# -- Adam --------------------------------------------------------------------------------

def test_adam_first_step_is_sign_times_lr():
    p = {"w": np.array([1.0, -1.0, 2.0])}
    g = {"w": np.array([0.3, -5.0, 1e-3])}
    state = AdamState(lr=0.01)
    adam_update(p, g, state)
    np.testing.assert_allclose(p["w"], [0.99, -0.99, 1.99], atol=1e-7)


def test_adam_zero_grad_keeps_params_and_decays_moments():
    p = {"w": np.array([1.0])}
    state = AdamState()
    adam_update(p, {"w": np.array([2.0])}, state)
    after_first = p["w"].copy()
    m, v = state.m["w"].copy(), state.v["w"].copy()
    adam_update(p, {"w": np.array([0.0])}, state)
    np.testing.assert_allclose(state.m["w"], 0.9 * m)
    np.testing.assert_allclose(state.v["w"], 0.999 * v)
    # the decayed first moment still moves the parameter, in the same direction
    assert p["w"][0] < after_first[0]


def test_adam_zero_grad_from_fresh_state_is_identity():
    p = {"w": np.array([1.5, -0.5])}
    adam_update(p, {"w": np.zeros(2)}, AdamState())
    np.testing.assert_array_equal(p["w"], [1.5, -0.5])


def test_adam_descends_scalar_quadratic():
    w = ag.parameter([3.0], "w")
    state = AdamState(lr=0.1)
    losses = []
    for _ in range(3):
        loss = (w * w).sum()
        losses.append(loss.item())
        (g,) = grad(loss, [w])
        adam_update({"w": w}, {"w": g}, state)
    assert losses[2] < losses[1] < losses[0]


def test_adam_shape_mismatch():
    with pytest.raises(ContractViolation):
        adam_update({"w": np.zeros(2)}, {"w": np.zeros(3)}, AdamState())


def test_clip_grad_norm():
    g = {"a": np.array([3.0]), "b": np.array([4.0])}
    assert clip_grad_norm(g, 1.0) == pytest.approx(5.0)
    assert math.hypot(g["a"][0], g["b"][0]) == pytest.approx(1.0)


def test_flatten_keeps_parameters_as_views():
    net = Mlp([3, 4, 2], rng=np.random.default_rng(0))
    before = net.state_dict()
    flat = net.flatten()
    for k, v in net.state_dict().items():
        np.testing.assert_array_equal(v, before[k])
    flat += 1.0
    for k, t in net.parameters().items():
        np.testing.assert_array_equal(t.data, before[k] + 1.0)


# -- checkpoints ---------------------------------------------------------------------------

def test_checkpoint_roundtrip(tmp_path):
    net = Lstm(3, 2, rng=np.random.default_rng(5))
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, net.state_dict(), {"seed": 5})
    state, meta = load_checkpoint(path)
    assert meta == {"seed": 5}
    other = Lstm(3, 2, rng=np.random.default_rng(6))
    other.load_state_dict(state)
    for k, v in net.state_dict().items():
        np.testing.assert_array_equal(other.state_dict()[k], v)


def test_checkpoint_rejects_unknown_format_and_bad_shapes():
    with pytest.raises(ValueError):
        load_params('{"format": "other", "params": {}}')
    state, _ = load_params(dump_params({"lstm.W_f": np.zeros((1, 1))}))
    with pytest.raises(KeyError):
        Lstm(3, 2).load_state_dict(state)
