"""Differentiable building blocks: linear maps, a single-layer LSTM and multi-head attention."""

from __future__ import annotations

import math
from collections.abc import Sequence

import numpy as np

from ..errors import ConfigurationError, DomainError
from .tensor import (
    ParamTensor,
    Tensor,
    TensorLike,
    add,
    as_tensor,
    matmul,
    mul,
    reshape,
    sigmoid,
    softmax,
    stack,
    swapaxes,
    tanh,
)


def uniform_init(
    rng: np.random.Generator, shape: tuple[int, ...], fan_in: int, name: str
) -> ParamTensor:
    """Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]."""
    bound = 1.0 / math.sqrt(fan_in)
    return ParamTensor(rng.uniform(-bound, bound, size=shape), name=name)


def linear(x: TensorLike, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map `W x + b` applied over the last axis of `x`.

    `weight` has shape (out, in).
    """
    x = as_tensor(x)
    if weight.ndim != 2 or x.shape[-1] != weight.shape[1]:
        raise ConfigurationError(
            f"linear: input dim {x.shape[-1]} does not match weight {weight.shape}"
        )
    y = matmul(x, weight.T)
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise ConfigurationError(
                f"linear: bias shape {bias.shape} does not match weight {weight.shape}"
            )
        y = add(y, bias)
    return y


def lstm_sequence(
    xs: TensorLike | Sequence[TensorLike],
    w_input: Tensor,
    w_hidden: Tensor,
    bias: Tensor,
) -> Tensor:
    """Run a single-layer LSTM from zero initial state.

    `xs` is either a tensor shaped (..., steps, in) or a sequence of step vectors.
    Weights are stacked in gate order input, forget, candidate, output:
    `w_input` (4H, in), `w_hidden` (4H, H), `bias` (4H,).
    Returns every hidden state, shaped (..., steps, H).
    """
    if isinstance(xs, Tensor) or isinstance(xs, np.ndarray):
        seq = as_tensor(xs)
    else:
        steps = list(xs)
        if not steps:
            raise DomainError("lstm_sequence: empty sequence")
        seq = stack([as_tensor(s) for s in steps], axis=-2)
    if seq.ndim < 2:
        raise DomainError(
            f"lstm_sequence: input shaped {seq.shape}, expected (..., steps, in)"
        )
    if seq.shape[-2] == 0:
        raise DomainError("lstm_sequence: empty sequence")

    hidden = w_hidden.shape[1]
    if w_input.shape[0] != 4 * hidden or w_hidden.shape != (4 * hidden, hidden):
        raise ConfigurationError("lstm_sequence: gate weights must stack four H-sized blocks")

    projected = linear(seq, w_input, bias)
    batch_shape = seq.shape[:-2]
    h: Tensor = Tensor(np.zeros((*batch_shape, hidden)))
    c: Tensor = Tensor(np.zeros((*batch_shape, hidden)))
    w_hidden_t = w_hidden.T
    outputs: list[Tensor] = []
    for step in range(seq.shape[-2]):
        gates = add(projected[..., step, :], matmul(h, w_hidden_t))
        i = sigmoid(gates[..., 0:hidden])
        f = sigmoid(gates[..., hidden : 2 * hidden])
        g = tanh(gates[..., 2 * hidden : 3 * hidden])
        o = sigmoid(gates[..., 3 * hidden : 4 * hidden])
        c = add(mul(f, c), mul(i, g))
        h = mul(o, tanh(c))
        outputs.append(h)
    return stack(outputs, axis=-2)


def _split_heads(x: Tensor, head_count: int) -> Tensor:
    *lead, length, width = x.shape
    heads = reshape(x, (*lead, length, head_count, width // head_count))
    return swapaxes(heads, -2, -3)


def attention(q: TensorLike, k: TensorLike, v: TensorLike, head_count: int) -> Tensor:
    """Multi-head scaled dot-product attention, softmax(Q K^T / sqrt(d)) V per head.

    `d` is the per-head width. Heads are concatenated back to the input width.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    width = q.shape[-1]
    if head_count < 1 or width % head_count != 0:
        raise ConfigurationError(f"attention: {head_count} heads do not divide width {width}")
    if k.shape[-1] != width or v.shape[-1] != width:
        raise ConfigurationError("attention: Q, K and V must share the hidden width")
    if k.shape[-2] != v.shape[-2]:
        raise ConfigurationError("attention: K and V must have the same number of rows")

    head_dim = width // head_count
    qh, kh, vh = (_split_heads(t, head_count) for t in (q, k, v))
    scores = mul(matmul(qh, swapaxes(kh, -1, -2)), 1.0 / math.sqrt(head_dim))
    weights = softmax(scores, axis=-1)
    context = swapaxes(matmul(weights, vh), -2, -3)
    return reshape(context, (*context.shape[:-2], width))


class Linear:
    """Holder for the weight and bias of an affine map."""

    def __init__(
        self, in_dim: int, out_dim: int, rng: np.random.Generator, name: str, bias: bool = True
    ) -> None:
        self.weight = uniform_init(rng, (out_dim, in_dim), in_dim, f"{name}.weight")
        self.bias = uniform_init(rng, (out_dim,), in_dim, f"{name}.bias") if bias else None

    def __call__(self, x: TensorLike) -> Tensor:
        return linear(x, self.weight, self.bias)

    def parameters(self) -> list[ParamTensor]:
        return [self.weight] if self.bias is None else [self.weight, self.bias]


class LSTM:
    """Single-layer unidirectional LSTM."""

    def __init__(self, in_dim: int, hidden: int, rng: np.random.Generator, name: str) -> None:
        self.w_input = uniform_init(rng, (4 * hidden, in_dim), hidden, f"{name}.w_input")
        self.w_hidden = uniform_init(rng, (4 * hidden, hidden), hidden, f"{name}.w_hidden")
        self.bias = uniform_init(rng, (4 * hidden,), hidden, f"{name}.bias")

    def __call__(self, xs: TensorLike) -> Tensor:
        return lstm_sequence(xs, self.w_input, self.w_hidden, self.bias)

    def parameters(self) -> list[ParamTensor]:
        return [self.w_input, self.w_hidden, self.bias]


class MultiHeadAttention:
    """W^Q, W^K, W^V projections, scaled dot-product attention and one output projection.

    No residual connection.
    """

    def __init__(self, width: int, head_count: int, rng: np.random.Generator, name: str) -> None:
        if width % head_count != 0:
            raise ConfigurationError(f"{name}: {head_count} heads do not divide width {width}")
        self.head_count = head_count
        self.query = Linear(width, width, rng, f"{name}.query", bias=False)
        self.key = Linear(width, width, rng, f"{name}.key", bias=False)
        self.value = Linear(width, width, rng, f"{name}.value", bias=False)
        self.output = Linear(width, width, rng, f"{name}.output")

    def __call__(self, queries: TensorLike, context: TensorLike | None = None) -> Tensor:
        source = queries if context is None else context
        mixed = attention(
            self.query(queries), self.key(source), self.value(source), self.head_count
        )
        return self.output(mixed)

    def parameters(self) -> list[ParamTensor]:
        return [
            *self.query.parameters(),
            *self.key.parameters(),
            *self.value.parameters(),
            *self.output.parameters(),
        ]
