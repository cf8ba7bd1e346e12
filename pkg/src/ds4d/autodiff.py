"""Reverse-mode automatic differentiation over dense float64 arrays.

A ``Tensor`` wraps a numpy array and remembers the operations that produced
it. Calling :meth:`Tensor.backward` on a scalar result walks the recorded
graph in reverse topological order and accumulates gradients into every
tensor created with ``requires_grad=True``. The graph lives only as long as
the result tensor, so each training iteration starts from a clean tape.

All arithmetic is done in 64-bit floats; 32-bit conversion happens only at
file boundaries.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeError

Array = np.ndarray


def _unbroadcast(grad: Array, shape: tuple) -> Array:
    """Sum out broadcast dimensions so ``grad`` matches ``shape``."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    """Dense float64 array with optional gradient tracking."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple = ()
        self._backward: Callable[[Array], None] | None = None

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __repr__(self) -> str:
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    def numpy(self) -> Array:
        """Copy of the underlying values, detached from the graph."""
        return self.data.copy()

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    # -- graph machinery -----------------------------------------------------

    def _accumulate(self, grad: Array) -> None:
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.data.shape:
            grad = np.broadcast_to(grad, self.data.shape)
        if self.grad is None:
            self.grad = np.array(grad)
        else:
            self.grad = self.grad + grad

    def backward(self, grad: Array | None = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable ``requires_grad`` leaf."""
        if grad is None:
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def sum(self, axis=None, keepdims: bool = False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])


def as_tensor(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def make_op(data: Array, parents: Sequence[Tensor], backward: Callable[[Array], None]) -> Tensor:
    """Build an output tensor wired into the graph.

    ``backward`` receives the upstream gradient and must accumulate into the
    parents via ``Tensor._accumulate``. It is only invoked when at least one
    parent tracks gradients.
    """
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


# -- elementwise arithmetic ----------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad, b.shape))

    return make_op(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-grad, b.shape))

    return make_op(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(grad * a.data, b.shape))

    return make_op(a.data * b.data, (a, b), backward)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def backward(grad):
        if a.requires_grad:
            a._accumulate(_unbroadcast(grad / b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-grad * a.data / (b.data * b.data), b.shape))

    return make_op(a.data / b.data, (a, b), backward)


def square(a) -> Tensor:
    a = as_tensor(a)

    def backward(grad):
        a._accumulate(grad * 2.0 * a.data)

    return make_op(a.data * a.data, (a,), backward)


def absolute(a) -> Tensor:
    """|a| with subgradient 0 at the origin."""
    a = as_tensor(a)

    def backward(grad):
        a._accumulate(grad * np.sign(a.data))

    return make_op(np.abs(a.data), (a,), backward)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.exp(a.data)

    def backward(grad):
        a._accumulate(grad * out_data)

    return make_op(out_data, (a,), backward)


def log(a) -> Tensor:
    a = as_tensor(a)

    def backward(grad):
        a._accumulate(grad / a.data)

    return make_op(np.log(a.data), (a,), backward)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.sqrt(a.data)

    def backward(grad):
        a._accumulate(grad * 0.5 / out_data)

    return make_op(out_data, (a,), backward)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out_data = np.tanh(a.data)

    def backward(grad):
        a._accumulate(grad * (1.0 - out_data * out_data))

    return make_op(out_data, (a,), backward)


def leaky_relu(a, slope: float = 0.01) -> Tensor:
    """x for x >= 0, slope*x otherwise; derivative 1 at exactly 0."""
    a = as_tensor(a)
    factor = np.where(a.data >= 0.0, 1.0, slope)

    def backward(grad):
        a._accumulate(grad * factor)

    return make_op(a.data * factor, (a,), backward)


# -- linear algebra and shuffling ------------------------------------------------


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2):
        raise ShapeError(f"matmul supports 1-D/2-D operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")

    def backward(grad):
        if a.ndim == 1 and b.ndim == 1:
            if a.requires_grad:
                a._accumulate(grad * b.data)
            if b.requires_grad:
                b._accumulate(grad * a.data)
        elif a.ndim == 2 and b.ndim == 1:
            if a.requires_grad:
                a._accumulate(np.outer(grad, b.data))
            if b.requires_grad:
                b._accumulate(a.data.T @ grad)
        elif a.ndim == 1 and b.ndim == 2:
            if a.requires_grad:
                a._accumulate(b.data @ grad)
            if b.requires_grad:
                b._accumulate(np.outer(a.data, grad))
        else:
            if a.requires_grad:
                a._accumulate(grad @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ grad)

    return make_op(a.data @ b.data, (a, b), backward)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)

    def backward(grad):
        g = grad
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    return make_op(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else np.prod([a.shape[i] for i in np.atleast_1d(axis)])

    def backward(grad):
        g = grad / count
        if not keepdims and axis is not None:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.shape).copy())

    return make_op(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)

    def backward(grad):
        a._accumulate(grad.reshape(a.shape))

    return make_op(a.data.reshape(shape), (a,), backward)


def getitem(a, key) -> Tensor:
    a = as_tensor(a)

    def backward(grad):
        full = np.zeros_like(a.data)
        np.add.at(full, key, grad)
        a._accumulate(full)

    return make_op(a.data[key], (a,), backward)


def concat(tensors: Iterable, axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward(grad):
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if part.requires_grad:
                idx = [slice(None)] * grad.ndim
                idx[axis] = slice(lo, hi)
                part._accumulate(grad[tuple(idx)])

    return make_op(np.concatenate([p.data for p in parts], axis=axis), parts, backward)


def stack(tensors: Iterable, axis: int = 0) -> Tensor:
    parts = [as_tensor(t) for t in tensors]

    def backward(grad):
        slabs = np.moveaxis(grad, axis, 0)
        for part, slab in zip(parts, slabs):
            if part.requires_grad:
                part._accumulate(slab)

    return make_op(np.stack([p.data for p in parts], axis=axis), parts, backward)
