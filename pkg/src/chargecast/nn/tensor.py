"""Reverse-mode differentiable arrays.

A `Tensor` wraps a float64 numpy array and remembers the operation that produced it.
Calling `backward` on a scalar result walks the recorded graph in reverse topological
order and accumulates gradients into every tensor that requires them.
"""

from __future__ import annotations

import contextlib
import contextvars
from collections.abc import Callable, Iterator, Sequence
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

Array = NDArray[np.float64]

_grad_enabled: contextvars.ContextVar[bool] = contextvars.ContextVar(
    "chargecast_grad_enabled", default=True
)


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording in the current context (thread-local)."""
    token = _grad_enabled.set(False)
    try:
        yield
    finally:
        _grad_enabled.reset(token)


class Tensor:
    """A node in the computation graph."""

    __slots__ = ("data", "grad", "name", "requires_grad", "_parents", "_backward")

    def __init__(
        self,
        data: ArrayLike,
        *,
        name: str = "",
        requires_grad: bool = False,
    ) -> None:
        self.data: Array = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.name = name
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[Array], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, grad: Array) -> None:
        if self.grad is None:
            self.grad = np.array(grad, dtype=np.float64, copy=True)
        else:
            self.grad = self.grad + grad

    def backward(self, grad: ArrayLike | None = None) -> None:
        """Back-propagate from this tensor through the recorded graph."""
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar tensor")
            seed = np.ones_like(self.data)
        else:
            seed = np.broadcast_to(np.asarray(grad, dtype=np.float64), self.shape).copy()

        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))

        self._accumulate(seed)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                # interior gradients are not needed once propagated
                if not isinstance(node, ParamTensor) and node._parents:
                    node.grad = None

    # operator sugar

    def __add__(self, other: TensorLike) -> Tensor:
        return add(self, other)

    def __radd__(self, other: TensorLike) -> Tensor:
        return add(other, self)

    def __sub__(self, other: TensorLike) -> Tensor:
        return sub(self, other)

    def __rsub__(self, other: TensorLike) -> Tensor:
        return sub(other, self)

    def __mul__(self, other: TensorLike) -> Tensor:
        return mul(self, other)

    def __rmul__(self, other: TensorLike) -> Tensor:
        return mul(other, self)

    def __neg__(self) -> Tensor:
        return mul(self, -1.0)

    def __matmul__(self, other: TensorLike) -> Tensor:
        return matmul(self, other)

    def __getitem__(self, index: Any) -> Tensor:
        return getitem(self, index)

    @property
    def T(self) -> Tensor:  # noqa: N802
        return swapaxes(self, -1, -2)


class ParamTensor(Tensor):
    """A learnable leaf tensor whose gradient always has the shape of its values."""

    __slots__ = ()

    def __init__(self, data: ArrayLike, *, name: str) -> None:
        super().__init__(data, name=name, requires_grad=True)
        self.grad = np.zeros_like(self.data)

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)


TensorLike = Tensor | ArrayLike


def as_tensor(value: TensorLike) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _result(
    data: Array,
    parents: Sequence[Tensor],
    backward: Callable[[Array], None],
) -> Tensor:
    out = Tensor(data)
    if _grad_enabled.get() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), backward)


def sub(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.shape))

    return _result(a.data - b.data, (a, b), backward)


def mul(a: TensorLike, b: TensorLike) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(g: Array) -> None:
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward)


def square(x: TensorLike) -> Tensor:
    x = as_tensor(x)

    def backward(g: Array) -> None:
        x._accumulate(2.0 * x.data * g)

    return _result(x.data * x.data, (x,), backward)


def matmul(a: TensorLike, b: TensorLike) -> Tensor:
    """Batched matrix product with numpy broadcasting; 1-D operands are promoted."""
    a, b = as_tensor(a), as_tensor(b)
    out = np.matmul(a.data, b.data)

    def backward(g: Array) -> None:
        a2 = a.data[None, :] if a.ndim == 1 else a.data
        b2 = b.data[:, None] if b.ndim == 1 else b.data
        g2 = g
        if a.ndim == 1:
            g2 = np.expand_dims(g2, -2)
        if b.ndim == 1:
            g2 = np.expand_dims(g2, -1)
        if a.requires_grad:
            ga = np.matmul(g2, np.swapaxes(b2, -1, -2))
            a._accumulate(_unbroadcast(ga, a2.shape).reshape(a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a2, -1, -2), g2)
            b._accumulate(_unbroadcast(gb, b2.shape).reshape(b.shape))

    return _result(out, (a, b), backward)


def tanh(x: TensorLike) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)

    def backward(g: Array) -> None:
        x._accumulate(g * (1.0 - y * y))

    return _result(y, (x,), backward)


def sigmoid(x: TensorLike) -> Tensor:
    x = as_tensor(x)
    # split evaluation keeps exp() from overflowing for large |x|
    z = np.exp(-np.abs(x.data))
    y = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z))

    def backward(g: Array) -> None:
        x._accumulate(g * y * (1.0 - y))

    return _result(y, (x,), backward)


def softmax(x: TensorLike, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g: Array) -> None:
        x._accumulate(y * (g - (g * y).sum(axis=axis, keepdims=True)))

    return _result(y, (x,), backward)


def sum_(
    x: TensorLike, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
) -> Tensor:
    x = as_tensor(x)

    def backward(g: Array) -> None:
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.shape))

    return _result(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward)


def mean(
    x: TensorLike, axis: int | tuple[int, ...] | None = None, keepdims: bool = False
) -> Tensor:
    x = as_tensor(x)
    total = sum_(x, axis=axis, keepdims=keepdims)
    count = x.data.size // max(total.data.size, 1)
    return mul(total, 1.0 / count)


def reshape(x: TensorLike, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)

    def backward(g: Array) -> None:
        x._accumulate(g.reshape(x.shape))

    return _result(x.data.reshape(shape), (x,), backward)


def swapaxes(x: TensorLike, axis1: int, axis2: int) -> Tensor:
    x = as_tensor(x)

    def backward(g: Array) -> None:
        x._accumulate(np.swapaxes(g, axis1, axis2))

    return _result(np.swapaxes(x.data, axis1, axis2), (x,), backward)


def getitem(x: TensorLike, index: Any) -> Tensor:
    x = as_tensor(x)
    parts = index if isinstance(index, tuple) else (index,)
    fancy = any(isinstance(p, (list, np.ndarray)) for p in parts)

    def backward(g: Array) -> None:
        full = np.zeros_like(x.data)
        if fancy:
            np.add.at(full, index, g)
        else:
            full[index] += g
        x._accumulate(full)

    return _result(np.asarray(x.data[index]), (x,), backward)


def concat(tensors: Sequence[TensorLike], axis: int = -1) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g: Array) -> None:
        for part, piece in zip(parts, np.split(g, bounds, axis=axis), strict=True):
            if part.requires_grad:
                part._accumulate(piece)

    return _result(np.concatenate([p.data for p in parts], axis=axis), parts, backward)


def stack(tensors: Sequence[TensorLike], axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]

    def backward(g: Array) -> None:
        for i, part in enumerate(parts):
            if part.requires_grad:
                part._accumulate(np.take(g, i, axis=axis))

    return _result(np.stack([p.data for p in parts], axis=axis), parts, backward)
