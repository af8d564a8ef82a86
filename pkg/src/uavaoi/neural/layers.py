"""Dense and LSTM layers on top of :mod:`uavaoi.neural.autograd`.

The LSTM wiring differs from the textbook cell: the forget and input gates see
the previous cell state as well, the candidate sees only ``[h, x]``, and the
output gate sees the *new* cell state::

    F   = sigmoid(W_f [h_prev, c_prev, x] + e_f)
    p   = sigmoid(W_p [h_prev, c_prev, x] + e_p)
    c   = F * c_prev + p * tanh(W_c [h_prev, x] + e_c)
    out = sigmoid(W_o [c, h_prev, x] + e_o)
    h   = out * tanh(c)
"""
from __future__ import annotations

from collections import OrderedDict

import numpy as np

from ..errors import ContractViolation, NonFiniteError
from . import autograd as ag
from .autograd import Tensor, np_sigmoid

ACTIVATIONS = {
    "identity": ag.identity,
    "relu": ag.relu,
    "tanh": ag.tanh,
    "softmax": ag.softmax,
}


def fan_in_uniform(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(n_in)
    return rng.uniform(-bound, bound, size=(n_out, n_in))


class Module:
    """Anything holding named parameters, possibly through sub-modules."""

    def __init__(self, name: str):
        self.name = name

    def own_parameters(self) -> "OrderedDict[str, Tensor]":
        return OrderedDict()

    def children(self) -> list["Module"]:
        return []

    def parameters(self) -> "OrderedDict[str, Tensor]":
        out = OrderedDict(self.own_parameters())
        for child in self.children():
            out.update(child.parameters())
        return out

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, t.data.copy()) for k, t in self.parameters().items())

    def load_state_dict(self, state) -> None:
        params = self.parameters()
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for k, t in params.items():
            arr = np.asarray(state[k], dtype=float)
            if arr.shape != t.shape:
                raise ContractViolation(f"{k}: shape {arr.shape} != {t.shape}")
            t.data[...] = arr

    def flatten(self) -> np.ndarray:
        """Move every parameter into one contiguous vector and return it.

        Parameters become views into the vector, so optimisers can update the
        whole model with a handful of vector operations.
        """
        params = list(self.parameters().values())
        flat = np.concatenate([t.data.ravel() for t in params])
        k = 0
        for t in params:
            n = t.data.size
            t.data = flat[k:k + n].reshape(t.shape)
            k += n
        return flat


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, activation: str = "identity", *,
                 name: str = "dense", rng: np.random.Generator | None = None):
        super().__init__(name)
        if activation not in ACTIVATIONS:
            raise ContractViolation(f"unknown activation {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_in, self.n_out, self.activation = n_in, n_out, activation
        self.weight = ag.parameter(fan_in_uniform(rng, n_out, n_in), f"{name}.weight")
        self.bias = ag.parameter(np.zeros(n_out), f"{name}.bias")

    def own_parameters(self):
        return OrderedDict([(self.weight.name, self.weight), (self.bias.name, self.bias)])

    def __call__(self, x) -> Tensor:
        x = ag.as_tensor(x)
        if x.shape[-1] != self.n_in:
            raise ContractViolation(f"{self.name}: input width {x.shape[-1]} != {self.n_in}")
        with ag.scope(self.name):
            return ACTIVATIONS[self.activation](ag.affine(x, self.weight, self.bias))


def dense_forward(layer: Dense, x) -> np.ndarray:
    return layer(x).data


class Mlp(Module):
    """Stack of dense layers; ``sizes`` lists widths from input to output."""

    def __init__(self, sizes, hidden_activation="relu", out_activation="identity", *,
                 name="mlp", rng=None):
        super().__init__(name)
        self.layers = []
        for k, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
            act = out_activation if k == len(sizes) - 2 else hidden_activation
            self.layers.append(Dense(a, b, act, name=f"{name}.{k}", rng=rng))

    def children(self):
        return self.layers

    def __call__(self, x) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


class Lstm(Module):
    """LSTM layer with the gate wiring described in the module docstring.

    ``state`` holds ``(h, c)`` for online use through :meth:`step`;
    :meth:`sequence` runs a whole batch of sequences and is differentiable.
    """

    def __init__(self, n_in: int, n_hidden: int, *, name: str = "lstm",
                 rng: np.random.Generator | None = None):
        super().__init__(name)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.n_in, self.n_hidden = n_in, n_hidden
        H, n = n_hidden, n_in
        self.W_f = ag.parameter(fan_in_uniform(rng, H, 2 * H + n), f"{name}.W_f")
        self.W_p = ag.parameter(fan_in_uniform(rng, H, 2 * H + n), f"{name}.W_p")
        self.W_c = ag.parameter(fan_in_uniform(rng, H, H + n), f"{name}.W_c")
        self.W_o = ag.parameter(fan_in_uniform(rng, H, 2 * H + n), f"{name}.W_o")
        self.e_f = ag.parameter(np.zeros(H), f"{name}.e_f")
        self.e_p = ag.parameter(np.zeros(H), f"{name}.e_p")
        self.e_c = ag.parameter(np.zeros(H), f"{name}.e_c")
        self.e_o = ag.parameter(np.zeros(H), f"{name}.e_o")
        self.state = self.zero_state(1)

    def own_parameters(self):
        ts = [self.W_f, self.W_p, self.W_c, self.W_o, self.e_f, self.e_p, self.e_c, self.e_o]
        return OrderedDict((t.name, t) for t in ts)

    def zero_state(self, batch: int):
        return np.zeros((batch, self.n_hidden)), np.zeros((batch, self.n_hidden))

    def reset_state(self, batch: int = 1) -> None:
        self.state = self.zero_state(batch)

    # -- plain numpy step, used for acting --------------------------------
    def step(self, x) -> np.ndarray:
        """Advance :attr:`state` by one input row per batch entry and return ``h``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[-1] != self.n_in:
            raise ContractViolation(f"{self.name}: input width {x.shape[-1]} != {self.n_in}")
        h, c = self.state
        if h.shape[0] != x.shape[0]:
            raise ContractViolation(f"{self.name}: state batch {h.shape[0]} != input batch {x.shape[0]}")
        h, c, _ = _lstm_cell(self._weights(), x, h, c)
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(c))):
            raise NonFiniteError(self.name, "step")
        self.state = (h, c)
        return h

    def _weights(self):
        return _split_weights(self.n_hidden, self.n_in,
                              self.W_f.data, self.W_p.data, self.W_c.data, self.W_o.data,
                              self.e_f.data, self.e_p.data, self.e_c.data, self.e_o.data)

    # -- differentiable sequence --------------------------------------------
    def sequence(self, xs, h0=None, c0=None) -> Tensor:
        """Hidden states for inputs of shape (T, B, n_in); returns (T, B, H).

        Backpropagation runs through all T steps; weight gradients are
        accumulated with one matmul per block after the backward sweep.
        """
        xs = ag.as_tensor(xs)
        if xs.ndim != 3 or xs.shape[-1] != self.n_in:
            raise ContractViolation(f"{self.name}: expected (T, B, {self.n_in}), got {xs.shape}")
        T, B, n = xs.shape
        H = self.n_hidden
        h0 = np.zeros((B, H)) if h0 is None else np.asarray(h0, float)
        c0 = np.zeros((B, H)) if c0 is None else np.asarray(c0, float)
        params = (self.W_f, self.W_p, self.W_c, self.W_o, self.e_f, self.e_p, self.e_c, self.e_o)
        _, Wh, Wc, Wx, b, Woc, Woh, Wox, e_o = w = self._weights()
        X = xs.data
        XW = X @ Wx + b  # (T, B, 3H): input part of f, p and candidate
        XO = X @ Wox + e_o
        hs = np.empty((T + 1, B, H))
        cs = np.empty((T + 1, B, H))
        hs[0], cs[0] = h0, c0
        FP = np.empty((T, B, 2 * H))
        G = np.empty((T, B, H))
        TC = np.empty((T, B, H))
        O = np.empty((T, B, H))
        for t in range(T):
            h_prev, c_prev = hs[t], cs[t]
            z = h_prev @ Wh + XW[t]
            z[:, :2 * H] += c_prev @ Wc
            fp = FP[t] = _sig(z[:, :2 * H])
            g = G[t] = np.tanh(z[:, 2 * H:])
            c = cs[t + 1] = fp[:, :H] * c_prev + fp[:, H:] * g
            o = O[t] = _sig(c @ Woc + h_prev @ Woh + XO[t])
            tc = TC[t] = np.tanh(c)
            hs[t + 1] = o * tc

        def back(dhs):
            dZ3 = np.empty((T, B, 3 * H))  # f, p, candidate pre-activations
            dZo = np.empty((T, B, H))
            WhT, WcT, WocT, WohT = Wh.T, Wc.T, Woc.T, Woh.T
            dh_next = np.zeros((B, H))
            dc_next = np.zeros((B, H))
            for t in range(T - 1, -1, -1):
                fp, g, tc, o, c_prev = FP[t], G[t], TC[t], O[t], cs[t]
                dh = dhs[t] + dh_next
                dz_o = dZo[t] = dh * tc * o * (1.0 - o)
                dc = dc_next + dh * o * (1.0 - tc * tc) + dz_o @ WocT
                dz = dZ3[t]
                dz[:, :H] = dc * c_prev
                dz[:, H:2 * H] = dc * g
                dz[:, :2 * H] *= fp * (1.0 - fp)
                dz[:, 2 * H:] = dc * fp[:, H:] * (1.0 - g * g)
                dh_next = dz @ WhT + dz_o @ WohT
                dc_next = dc * fp[:, :H] + dz[:, :2 * H] @ WcT
            Hp = hs[:-1].reshape(-1, H)
            Cp = cs[:-1].reshape(-1, H)
            Cn = cs[1:].reshape(-1, H)
            Xf = X.reshape(-1, n)
            Z3 = dZ3.reshape(-1, 3 * H)
            Zo = dZo.reshape(-1, H)
            gh = Z3.T @ Hp  # (3H, H)
            gc = Z3[:, :2 * H].T @ Cp  # (2H, H)
            gxw = Z3.T @ Xf  # (3H, n)
            gWf = np.concatenate([gh[:H], gc[:H], gxw[:H]], axis=1)
            gWp = np.concatenate([gh[H:2 * H], gc[H:], gxw[H:2 * H]], axis=1)
            gWc = np.concatenate([gh[2 * H:], gxw[2 * H:]], axis=1)
            gWo = np.concatenate([Zo.T @ Cn, Zo.T @ Hp, Zo.T @ Xf], axis=1)
            gb = Z3.sum(axis=0)
            gx = dZ3 @ Wx.T + dZo @ Wox.T
            return (gx, gWf, gWp, gWc, gWo, gb[:H], gb[H:2 * H], gb[2 * H:], Zo.sum(axis=0))

        with ag.scope(self.name):
            return ag._make(hs[1:], (xs,) + params, back, "lstm_sequence")


def _sig(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _split_weights(H, n, W_f, W_p, W_c, W_o, e_f, e_p, e_c, e_o):
    # Row-stack the blocks that multiply the same operand so each step needs
    # one matmul per operand.
    Wh = np.concatenate([W_f[:, :H], W_p[:, :H], W_c[:, :H]], axis=0)
    Wc = np.concatenate([W_f[:, H:2 * H], W_p[:, H:2 * H]], axis=0)
    Wx = np.concatenate([W_f[:, 2 * H:], W_p[:, 2 * H:], W_c[:, H:]], axis=0)
    b = np.concatenate([e_f, e_p, e_c])
    return H, Wh.T, Wc.T, Wx.T, b, W_o[:, :H].T, W_o[:, H:2 * H].T, W_o[:, 2 * H:].T, e_o


def _lstm_cell(w, x, h_prev, c_prev):
    H, Wh, Wc, Wx, b, Woc, Woh, Wox, e_o = w
    # same association order as Lstm.sequence so both paths agree bit for bit
    z = h_prev @ Wh + (x @ Wx + b)
    z[:, :2 * H] += c_prev @ Wc
    fp = _sig(z[:, :2 * H])
    F, P = fp[:, :H], fp[:, H:]
    G = np.tanh(z[:, 2 * H:])
    c = F * c_prev + P * G
    o = _sig(c @ Woc + h_prev @ Woh + (x @ Wox + e_o))
    tc = np.tanh(c)
    h = o * tc
    return h, c, (F, P, G, c, tc, o)


def lstm_step(layer: Lstm, x) -> np.ndarray:
    return layer.step(x)
