"""Minimal reverse-mode differentiable primitives sized for toy-scale training."""

from .layers import LSTM, Linear, MultiHeadAttention, attention, linear, lstm_sequence
from .optim import AdamState, adam_step
from .tensor import ParamTensor, Tensor, no_grad, softmax

__all__ = [
    "LSTM",
    "AdamState",
    "Linear",
    "MultiHeadAttention",
    "ParamTensor",
    "Tensor",
    "adam_step",
    "attention",
    "linear",
    "lstm_sequence",
    "no_grad",
    "softmax",
]
