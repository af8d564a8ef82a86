"""Array-level reverse-mode automatic differentiation.

A :class:`Tensor` wraps a float64 ``numpy`` array and remembers the op that
produced it. :func:`grad` walks the recorded graph backwards from a scalar.
Ops are coarse on purpose (a whole LSTM sequence is one node) so that the
Python overhead per training step stays small.

Every op checks its output for NaN/inf and raises :class:`NonFiniteError`
tagged with the innermost active :func:`scope`, which layers set to their own
name.
"""
from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np

from ..errors import NonFiniteError

_scopes: list[str] = []


@contextlib.contextmanager
def scope(name: str):
    """Label ops created inside the block with ``name`` for error reports."""
    _scopes.append(name)
    try:
        yield
    finally:
        _scopes.pop()


def _where(op: str) -> str:
    return f"{_scopes[-1]}/{op}" if _scopes else op


class Tensor:
    __slots__ = ("data", "parents", "backward_fn", "requires_grad", "name", "where")

    def __init__(self, data, parents: Sequence["Tensor"] = (), backward_fn=None,
                 requires_grad: bool = False, name: str | None = None, where: str = "input"):
        self.data = np.asarray(data, dtype=float)
        self.parents = tuple(parents)
        self.backward_fn = backward_fn
        self.requires_grad = requires_grad or any(p.requires_grad for p in self.parents)
        self.name = name
        self.where = where

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def T(self):
        return transpose(self)

    def item(self) -> float:
        return float(self.data.item())

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __rtruediv__ = lambda self, o: div(o, self)
    __neg__ = lambda self: neg(self)
    __matmul__ = lambda self, o: matmul(self, o)
    __pow__ = lambda self, k: power(self, k)
    __getitem__ = lambda self, idx: getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def parameter(data, name: str) -> Tensor:
    return Tensor(np.array(data, dtype=float), requires_grad=True, name=name, where=name)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _finite(a: np.ndarray) -> bool:
    # a NaN or inf anywhere makes the sum non-finite
    if type(a) is np.ndarray:
        return math.isfinite(a.sum())
    return math.isfinite(float(np.sum(a)))


def _make(data, parents, backward_fn, op: str) -> Tensor:
    where = _where(op)
    if not _finite(data):
        raise NonFiniteError(where, "forward")
    return Tensor(data, parents, backward_fn, where=where)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _make(a.data * b.data, (a, b),
                 lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
                 "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def back(g):
        return (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * out / b.data, b.shape))
    return _make(out, (a, b), back, "div")


def neg(a) -> Tensor:
    return _make(-a.data, (a,), lambda g: (-g,), "neg")


def power(a, k: float) -> Tensor:
    return _make(a.data ** k, (a,), lambda g: (g * k * a.data ** (k - 1),), "pow")


def exp(a) -> Tensor:
    out = np.exp(a.data)
    return _make(out, (a,), lambda g: (g * out,), "exp")


def log(a) -> Tensor:
    return _make(np.log(a.data), (a,), lambda g: (g / a.data,), "log")


def tanh(a) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, (a,), lambda g: (g * (1.0 - out * out),), "tanh")


def np_sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form cannot overflow
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def sigmoid(a) -> Tensor:
    out = np_sigmoid(a.data)
    return _make(out, (a,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(a) -> Tensor:
    mask = a.data > 0
    return _make(a.data * mask, (a,), lambda g: (g * mask,), "relu")


def identity(a) -> Tensor:
    return a


def minimum(a, b) -> Tensor:
    """Elementwise minimum; on ties the gradient goes to ``a``."""
    a, b = as_tensor(a), as_tensor(b)
    pick_a = a.data <= b.data
    out = np.where(pick_a, a.data, b.data)
    return _make(out, (a, b), lambda g: (_unbroadcast(g * pick_a, a.shape),
                                         _unbroadcast(g * ~pick_a, b.shape)), "minimum")


# ---------------------------------------------------------------- reductions / shape

def tsum(a, axis=None, keepdims=False) -> Tensor:
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)
    return _make(out, (a,), back, "sum")


def mean(a, axis=None, keepdims=False) -> Tensor:
    n = a.data.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])
    return tsum(a, axis, keepdims) * (1.0 / n)


def transpose(a) -> Tensor:
    return _make(a.data.T, (a,), lambda g: (g.T,), "transpose")


def reshape(a, shape) -> Tensor:
    return _make(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),), "reshape")


def getitem(a, idx) -> Tensor:
    def back(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)
    return _make(a.data[idx], (a,), back, "getitem")


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in ts], axis=axis)
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def back(g):
        return tuple(np.split(g, sizes, axis=axis))
    return _make(out, ts, back, "concat")


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def back(g):
        ga = g @ np.swapaxes(b.data, -1, -2) if b.ndim > 1 else np.multiply.outer(g, b.data)
        if a.ndim > 1:
            gb = np.swapaxes(a.data, -1, -2) @ g
        else:
            gb = np.multiply.outer(a.data, g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
    return _make(a.data @ b.data, (a, b), back, "matmul")


def affine(x, w, b) -> Tensor:
    """``x @ w.T + b`` for ``x`` of shape (..., in) and ``w`` of shape (out, in)."""
    x, w, b = as_tensor(x), as_tensor(w), as_tensor(b)
    out = x.data @ w.data.T + b.data

    def back(g):
        x2 = x.data.reshape(-1, x.shape[-1])
        g2 = g.reshape(-1, g.shape[-1])
        return g @ w.data, g2.T @ x2, g2.sum(axis=0)
    return _make(out, (x, w, b), back, "affine")


# ---------------------------------------------------------------- distributions

def log_softmax(a, axis: int = -1) -> Tensor:
    z = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    out = z - lse
    soft = np.exp(out)
    return _make(out, (a,), lambda g: (g - soft * g.sum(axis=axis, keepdims=True),),
                 "log_softmax")


def np_softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def softmax(a, axis: int = -1) -> Tensor:
    return exp(log_softmax(a, axis))


LOG_2PI = float(np.log(2.0 * np.pi))


def gaussian_log_prob(x, mu, log_std) -> Tensor:
    """Diagonal Gaussian log-density summed over the last axis."""
    x = as_tensor(x)
    z = (x - mu) / exp(log_std)
    per_dim = -0.5 * z * z - log_std - 0.5 * LOG_2PI
    return per_dim.sum(axis=-1)


def gaussian_entropy(log_std) -> Tensor:
    return (log_std + 0.5 * (1.0 + LOG_2PI)).sum(axis=-1)


def categorical_log_prob(logits, index) -> Tensor:
    lp = log_softmax(logits, axis=-1)
    index = np.asarray(index, dtype=int)
    rows = np.arange(index.shape[0])
    return lp[rows, index]


def categorical_entropy(logits) -> Tensor:
    lp = log_softmax(logits, axis=-1)
    return -(exp(lp) * lp).sum(axis=-1)


# ---------------------------------------------------------------- backward pass

def _topo(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def grad(loss: Tensor, wrt: Iterable[Tensor]) -> list[np.ndarray]:
    """Gradients of scalar ``loss`` with respect to each tensor in ``wrt``."""
    wrt = list(wrt)
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    if loss.requires_grad:
        for node in reversed(_topo(loss)):
            g = grads.pop(id(node), None) if node.backward_fn else grads.get(id(node))
            if g is None or node.backward_fn is None:
                continue
            if not _finite(g):
                raise NonFiniteError(node.where, "backward")
            for parent, pg in zip(node.parents, node.backward_fn(g)):
                if not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
    out = []
    for t in wrt:
        g = grads.get(id(t))
        if g is None:
            g = np.zeros_like(t.data)
        elif not _finite(g):
            raise NonFiniteError(t.where, "backward")
        out.append(np.asarray(g, dtype=float).reshape(t.shape))
    return out


def value_and_grad(fn: Callable[[], Tensor], wrt: Sequence[Tensor]):
    loss = fn()
    return loss.item(), grad(loss, wrt)
