"""Dense tensors with reverse-mode automatic differentiation.

Every op builds an output ``Tensor`` that remembers its parents and a
vector-Jacobian closure. ``Tensor.backward`` linearises the graph into a
:class:`GradTape` (reverse topological order) and replays it once.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Iterable, Sequence

import numpy as np

DTYPE = np.float64

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled() -> bool:
    return _grad_enabled


class DimensionError(ValueError):
    pass


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None

    # ------------------------------------------------------------------ basics
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=DTYPE, copy=True)
        else:
            self.grad += g

    # ---------------------------------------------------------------- autodiff
    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError(
                    f"backward() needs a scalar loss, got shape {self.shape}"
                )
            grad = np.ones_like(self.data)
        tape = GradTape.from_root(self)
        if not tape.nodes:
            raise ValueError("backward() on a tensor with no recorded graph")
        tape.replay(self, grad)

    # ------------------------------------------------------------- arithmetic
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, -_as_tensor(other))

    def __rsub__(self, other):
        return add(_as_tensor(other), -self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_tensor(other)
        if not other.requires_grad:
            return mul(self, Tensor(1.0 / other.data))
        return mul(self, other ** -1.0)

    def __rtruediv__(self, other):
        return mul(_as_tensor(other), self ** -1.0)

    def __neg__(self):
        return _unary(self, -self.data, lambda g: -g)

    def __pow__(self, p: float):
        x = self.data
        return _unary(self, x**p, lambda g: g * p * x ** (p - 1))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    # -------------------------------------------------------------- reductions
    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        shape = self.shape
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def back(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, shape)

        return _unary(self, out, back)

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        if axis is None:
            n = self.data.size
        else:
            axes = (axis,) if isinstance(axis, int) else axis
            n = int(np.prod([self.shape[a] for a in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # ----------------------------------------------------------- elementwise
    def exp(self) -> Tensor:
        y = np.exp(self.data)
        return _unary(self, y, lambda g: g * y)

    def log(self) -> Tensor:
        x = self.data
        return _unary(self, np.log(x), lambda g: g / x)

    def relu(self) -> Tensor:
        x = self.data
        return _unary(self, np.maximum(x, 0.0), lambda g: g * (x > 0))

    def sigmoid(self) -> Tensor:
        y = _sigmoid(self.data)
        return _unary(self, y, lambda g: g * y * (1.0 - y))

    def tanh(self) -> Tensor:
        y = np.tanh(self.data)
        return _unary(self, y, lambda g: g * (1.0 - y * y))

    def sqrt(self) -> Tensor:
        return self**0.5

    # ---------------------------------------------------------------- shaping
    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.shape
        return _unary(self, self.data.reshape(shape), lambda g: g.reshape(old))

    def transpose(self, *axes) -> Tensor:
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        inv = tuple(np.argsort(axes))
        return _unary(self, self.data.transpose(axes), lambda g: g.transpose(inv))

    def swapaxes(self, a: int, b: int) -> Tensor:
        return _unary(self, self.data.swapaxes(a, b), lambda g: g.swapaxes(a, b))

    @property
    def T(self) -> Tensor:
        return self.transpose()


class GradTape:
    """Ordered record of ops reachable from a root, in forward order."""

    def __init__(self, nodes: list[Tensor]):
        self.nodes = nodes

    @classmethod
    def from_root(cls, root: Tensor) -> GradTape:
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        return cls([n for n in order if n._backward is not None])

    def replay(self, root: Tensor, grad: np.ndarray) -> None:
        grads: dict[int, np.ndarray] = {id(root): np.asarray(grad, dtype=DTYPE)}
        for node in reversed(self.nodes):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            parent_grads = node._backward(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                if p._backward is None:
                    p._accumulate(_unbroadcast(pg, p.shape))
                elif id(p) in grads:
                    grads[id(p)] = grads[id(p)] + _unbroadcast(pg, p.shape)
                else:
                    grads[id(p)] = _unbroadcast(pg, p.shape)
        self.clear()

    def clear(self) -> None:
        # drop graph references so intermediate buffers are freed between steps
        for node in self.nodes:
            node._parents = ()
            node._backward = None
        self.nodes = []


# ---------------------------------------------------------------------- helpers
def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _make(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    track = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=track)
    if track:
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _unary(x: Tensor, data: np.ndarray, vjp) -> Tensor:
    return _make(data, (x,), lambda g: (vjp(g),))


# -------------------------------------------------------------------------- ops
def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    return _make(a.data + b.data, (a, b), lambda g: (g, g))


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    x, y = a.data, b.data
    return _make(x * y, (a, b), lambda g: (g * y, g * x))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; leading dimensions act as a batch."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    x, y = a.data, b.data
    if b.ndim == 2 and a.ndim > 2:
        # fold leading dims into one GEMM instead of a batched product
        k = x.shape[-1]
        x2 = x.reshape(-1, k)
        lead = x.shape[:-1]

        def back2(g):
            g2 = g.reshape(-1, g.shape[-1])
            return (g2 @ y.T).reshape(x.shape), x2.T @ g2

        return _make((x2 @ y).reshape(*lead, y.shape[1]), (a, b), back2)

    def back(g):
        ga = g @ np.swapaxes(y, -1, -2)
        gb = np.swapaxes(x, -1, -2) @ g
        return _unbroadcast(ga, x.shape), _unbroadcast(gb, y.shape)

    return _make(x @ y, (a, b), back)


def getitem(x: Tensor, idx) -> Tensor:
    shape = x.shape
    parts = idx if isinstance(idx, tuple) else (idx,)
    basic = all(isinstance(p, (slice, int, type(None), type(Ellipsis))) for p in parts)

    def back(g):
        out = np.zeros(shape, dtype=DTYPE)
        if basic:
            out[idx] = g
        else:
            np.add.at(out, idx, g)
        return (out,)

    return _make(x.data[idx], (x,), back)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def back(g):
        return tuple(np.split(g, splits, axis=axis))

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tensors, back)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]

    def back(g):
        return tuple(np.moveaxis(g, axis, 0))

    return _make(np.stack([t.data for t in tensors], axis=axis), tensors, back)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Max-shifted softmax along ``axis``."""
    if x.ndim == 0 or x.shape[axis] == 0:
        raise ValueError(f"softmax over empty axis {axis} of shape {x.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return ((g - (g * y).sum(axis=axis, keepdims=True)) * y,)

    return _make(y, (x,), back)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    if x.ndim == 0 or x.shape[axis] == 0:
        raise ValueError(f"log_softmax over empty axis {axis} of shape {x.shape}")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=axis, keepdims=True))
    y = z - lse
    p = np.exp(y)

    def back(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return _make(y, (x,), back)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    gd = gamma.data
    n = xd.shape[-1]

    def back(g):
        gxhat = g * gd
        gx = (
            inv
            / n
            * (
                n * gxhat
                - gxhat.sum(axis=-1, keepdims=True)
                - xhat * (gxhat * xhat).sum(axis=-1, keepdims=True)
            )
        )
        return gx, g * xhat, g

    return _make(xhat * gd + beta.data, (x, gamma, beta), back)


def embedding(weight: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup ``weight[ids]`` with scatter-add gradient."""
    ids = np.asarray(ids, dtype=np.int64)
    n_rows = weight.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n_rows):
        raise IndexError(f"token id out of range [0, {n_rows})")

    def back(g):
        out = np.zeros_like(weight.data)
        np.add.at(out, ids.reshape(-1), g.reshape(-1, weight.shape[1]))
        return (out,)

    return _make(weight.data[ids], (weight,), back)


def masked_fill(x: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where ``mask`` is true by a constant (no gradient there)."""
    mask = np.broadcast_to(np.asarray(mask, dtype=bool), x.shape)
    return _unary(x, np.where(mask, value, x.data), lambda g: np.where(mask, 0.0, g))


def dropout(x: Tensor, rate: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    if not training or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _unary(x, x.data * keep, lambda g: g * keep)


def logsumexp(x: Tensor, axis: int = -1) -> Tensor:
    m = x.data.max(axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    s = np.exp(x.data - m).sum(axis=axis, keepdims=True)
    out = np.log(s) + m
    w = np.exp(x.data - out)
    out = np.squeeze(out, axis=axis)

    def back(g):
        return (np.expand_dims(g, axis) * w,)

    return _make(out, (x,), back)


def binary_cross_entropy_with_logits(logits: Tensor, target: np.ndarray, weight: np.ndarray | None = None) -> Tensor:
    """Sum of elementwise BCE; ``weight`` masks entries."""
    z = logits.data
    t = np.asarray(target, dtype=DTYPE)
    w = np.ones_like(z) if weight is None else np.asarray(weight, dtype=DTYPE)
    loss = np.maximum(z, 0) - z * t + np.log1p(np.exp(-np.abs(z)))
    return _unary(logits, (loss * w).sum(), lambda g: g * w * (_sigmoid(z) - t))


def prod(x: Tensor) -> Tensor:
    """Product of all entries; gradient is exact even when entries are zero."""
    v = x.data.reshape(-1)
    n = v.size
    prefix = np.concatenate([[1.0], np.cumprod(v)[:-1]]) if n else v
    suffix = np.concatenate([np.cumprod(v[::-1])[::-1][1:], [1.0]]) if n else v
    shape = x.shape
    return _unary(x, np.prod(v), lambda g: (g * prefix * suffix).reshape(shape))


def parameters_of(tensors: Iterable[Tensor]) -> list[Tensor]:
    return [t for t in tensors if t.requires_grad]


# ----------------------------------------------------------------- gradcheck
def finite_difference_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor,
    eps: float = 1e-6,
    order: int = 2,
) -> float:
    """Max relative error between autodiff and central-difference gradients.

    ``f`` maps ``x`` to a scalar tensor. Relative error per entry is
    ``|a - b| / max(|a|, |b|, 1e-8)``. ``order=4`` uses the five-point stencil.
    """
    x = Tensor(np.array(x.data, copy=True), requires_grad=True)
    out = f(x)
    if out._backward is not None:
        out.backward()
    auto = x.grad if x.grad is not None else np.zeros_like(x.data)

    num = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    nflat = num.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]

            def at(delta):
                flat[i] = orig + delta
                val = float(f(x).data)
                flat[i] = orig
                return val

            if order == 4:
                # difference before weighting so equal values cancel exactly
                near = at(eps) - at(-eps)
                far = at(2 * eps) - at(-2 * eps)
                nflat[i] = (8 * near - far) / (12 * eps)
            else:
                nflat[i] = (at(eps) - at(-eps)) / (2 * eps)
    denom = np.maximum(np.maximum(np.abs(auto), np.abs(num)), 1e-8)
    return float(np.max(np.abs(auto - num) / denom)) if num.size else 0.0
