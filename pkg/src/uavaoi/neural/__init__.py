"""Minimal differentiable stack: tensors, dense and LSTM layers, Adam."""
from . import autograd
from .autograd import Tensor, grad, parameter, scope
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import Dense, Lstm, Mlp, Module, dense_forward, lstm_step
from .optim import AdamState, adam_update, clip_grad_norm


def gradients(model: Module, loss_fn, inputs) -> dict:
    """Reverse-mode gradients of ``loss_fn(model, inputs)`` for every parameter."""
    params = model.parameters()
    loss = loss_fn(model, inputs)
    return dict(zip(params, grad(loss, params.values())))


__all__ = [
    "AdamState", "Dense", "Lstm", "Mlp", "Module", "Tensor", "adam_update", "autograd",
    "clip_grad_norm", "dense_forward", "grad", "gradients", "load_checkpoint",
    "lstm_step", "parameter", "save_checkpoint", "scope",
]
