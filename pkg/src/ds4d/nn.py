"""Linear layers, small MLPs, Adam, and a finite-difference gradient checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import CheckError, DomainError, OptimizerError, ShapeError

ACTIVATIONS = ("leaky", "linear", "tanh")


def softmax(v, axis: int = -1) -> Tensor:
    """Numerically stable softmax; shift-invariant, rows sum to 1."""
    v = ad.as_tensor(v)
    if v.size == 0:
        raise DomainError("softmax of an empty vector is undefined")
    shifted = v - v.data.max(axis=axis, keepdims=True)
    e = ad.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


@dataclass
class LinearLayer:
    """Affine map y = W x + b with W of shape (out, in)."""

    weight: Tensor
    bias: Tensor

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ShapeError("weight must be 2-D and bias 1-D")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ShapeError(
                f"weight rows ({self.weight.shape[0]}) != bias length ({self.bias.shape[0]})"
            )

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    def parameters(self) -> list[Tensor]:
        return [self.weight, self.bias]


def init_linear(in_dim: int, out_dim: int, rng: np.random.Generator,
                scale: float | None = None, zero: bool = False,
                name: str = "linear") -> LinearLayer:
    """Uniform(-s, s) init with s = 1/sqrt(in_dim) unless overridden."""
    if zero:
        w = np.zeros((out_dim, in_dim))
        b = np.zeros(out_dim)
    else:
        s = scale if scale is not None else 1.0 / np.sqrt(in_dim)
        w = rng.uniform(-s, s, size=(out_dim, in_dim))
        b = rng.uniform(-s, s, size=out_dim)
    return LinearLayer(
        Tensor(w, requires_grad=True, name=f"{name}.weight"),
        Tensor(b, requires_grad=True, name=f"{name}.bias"),
    )


def linear_apply(layer: LinearLayer, x) -> Tensor:
    """Apply the layer to a vector (in,) or a batch (B, in)."""
    x = ad.as_tensor(x)
    if x.shape[-1] != layer.in_dim:
        raise ShapeError(f"input width {x.shape[-1]} != layer input dim {layer.in_dim}")
    if x.ndim == 1:
        return ad.matmul(layer.weight, x) + layer.bias
    if x.ndim == 2:
        return ad.matmul(x, transpose2d(layer.weight)) + layer.bias
    raise ShapeError(f"linear_apply expects 1-D or 2-D input, got shape {x.shape}")


def transpose2d(t: Tensor) -> Tensor:
    def backward(grad):
        t._accumulate(grad.T)

    return ad.make_op(t.data.T, (t,), backward)


def _activation_fn(name: str) -> Callable[[Tensor], Tensor]:
    if name == "leaky":
        return lambda t: ad.leaky_relu(t, 0.01)
    if name == "linear":
        return lambda t: t
    if name == "tanh":
        return ad.tanh
    raise DomainError(f"unknown activation {name!r}; expected one of {ACTIVATIONS}")


@dataclass
class Mlp:
    """Stack of linear layers with an elementwise nonlinearity between them.

    The activation is applied after every layer except the last. The default
    nonlinearity is leaky-linear (slope 0.01) so the derivative is nonzero
    everywhere, which keeps finite-difference checks tight.
    """

    layers: list[LinearLayer]
    activation: str = "leaky"

    def __post_init__(self):
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ShapeError(
                    f"layer widths do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        _activation_fn(self.activation)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]


def init_mlp(in_dim: int, hidden: Sequence[int], out_dim: int,
             rng: np.random.Generator, activation: str = "leaky",
             zero_final: bool = False, name: str = "mlp") -> Mlp:
    dims = [in_dim, *hidden, out_dim]
    layers = []
    for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
        last = i == len(dims) - 2
        layers.append(init_linear(a, b, rng, zero=zero_final and last,
                                  name=f"{name}.{i}"))
    return Mlp(layers, activation)


def mlp_apply(net: Mlp, x) -> Tensor:
    act = _activation_fn(net.activation)
    h = ad.as_tensor(x)
    for i, layer in enumerate(net.layers):
        h = linear_apply(layer, h)
        if i < len(net.layers) - 1:
            h = act(h)
    return h


# -- optimizer -------------------------------------------------------------------


@dataclass
class AdamState:
    """First/second moment accumulators for one parameter list."""

    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    @classmethod
    def for_params(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
            step=0,
        )

    def extend(self, params: Sequence[Tensor]) -> None:
        """Resize moment buffers after a parameter grew along axis 0."""
        for i, p in enumerate(params):
            if self.m[i].shape != p.data.shape:
                grown = p.data.shape[0] - self.m[i].shape[0]
                if grown < 0 or self.m[i].shape[1:] != p.data.shape[1:]:
                    raise ShapeError(
                        f"cannot extend Adam state from {self.m[i].shape} to {p.data.shape}"
                    )
                pad = np.zeros((grown,) + self.m[i].shape[1:])
                self.m[i] = np.concatenate([self.m[i], pad], axis=0)
                self.v[i] = np.concatenate([self.v[i], pad.copy()], axis=0)


def adam_step(params: Sequence[Tensor], grads: Sequence[np.ndarray], state: AdamState,
              lr: float, betas: tuple[float, float] = (0.9, 0.999),
              eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place on ``params``."""
    if lr <= 0:
        raise DomainError(f"learning rate must be positive, got {lr}")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads, and state must have equal lengths")
    b1, b2 = betas
    state.step += 1
    t = state.step
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.zeros_like(p.data) if g is None else np.asarray(g, dtype=np.float64)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        if not np.all(np.isfinite(g)):
            raise OptimizerError(f"non-finite gradient for parameter {p.name or i!r}")
        state.m[i] = b1 * state.m[i] + (1 - b1) * g
        state.v[i] = b2 * state.v[i] + (1 - b2) * g * g
        m_hat = state.m[i] / (1 - b1**t)
        v_hat = state.v[i] / (1 - b2**t)
        p.data = p.data - lr * m_hat / (np.sqrt(v_hat) + eps)


# -- verification ------------------------------------------------------------------


def grad_check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
               eps: float = 1e-6, max_entries: int | None = None,
               seed: int = 0) -> float:
    """Compare analytic gradients of ``loss_fn`` against central differences.

    Returns max over checked entries of |a - n| / max(|a|, |n|, 1e-8). With
    ``max_entries`` set, a seeded subset of entries per parameter is probed;
    otherwise every entry is.
    """
    if not (0 < eps <= 1e-2):
        raise DomainError(f"eps must lie in (0, 1e-2], got {eps}")
    for p in params:
        p.zero_grad()
    loss = loss_fn()
    if loss.size != 1:
        raise CheckError("loss_fn must be scalar-valued")
    if not np.isfinite(loss.data).all():
        raise CheckError("loss is non-finite at the probe point")
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        n_entries = flat.size
        if max_entries is not None and n_entries > max_entries:
            idx = rng.choice(n_entries, size=max_entries, replace=False)
        else:
            idx = np.arange(n_entries)
        a_flat = a.reshape(-1)
        for k in idx:
            orig = flat[k]
            flat[k] = orig + eps
            hi = float(loss_fn().data)
            flat[k] = orig - eps
            lo = float(loss_fn().data)
            flat[k] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise CheckError(f"loss non-finite while probing {p.name or 'param'!r}")
            numeric = (hi - lo) / (2 * eps)
            denom = max(abs(a_flat[k]), abs(numeric), 1e-8)
            worst = max(worst, abs(a_flat[k] - numeric) / denom)
    return worst
