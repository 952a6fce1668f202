"""Transformer building blocks on top of :mod:`signnet.tensor`."""
from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterator

import numpy as np

from ..tensor import (
    DimensionError,
    Tensor,
    dropout,
    layer_norm,
    masked_fill,
    matmul,
    softmax,
)


class Module:
    """Parameter container; parameters are discovered through attributes."""

    training = True

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{name}.")
            elif isinstance(value, list):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator[Module]:
        yield self
        for value in vars(self).values():
            if isinstance(value, Module):
                yield from value.modules()
            elif isinstance(value, list):
                for item in value:
                    if isinstance(item, Module):
                        yield from item.modules()

    def train(self, mode: bool = True) -> Module:
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> Module:
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for name, p in own.items():
            value = np.asarray(state[name], dtype=p.data.dtype)
            if value.shape != p.shape:
                raise DimensionError(f"{name}: expected shape {p.shape}, got {value.shape}")
            p.data[...] = value


def parameter(data: np.ndarray) -> Tensor:
    return Tensor(data, requires_grad=True)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator):
        bound = math.sqrt(6.0 / (n_in + n_out))
        self.weight = parameter(rng.uniform(-bound, bound, (n_in, n_out)))
        self.bias = parameter(np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        return matmul(x, self.weight) + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = parameter(np.ones(dim))
        self.beta = parameter(np.zeros(dim))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps)


@lru_cache(maxsize=32)
def _positional_table(seq_len: int, embed_dim: int) -> np.ndarray:
    pos = np.arange(seq_len, dtype=np.float64)[:, None]
    two_i = np.arange(0, embed_dim, 2, dtype=np.float64)
    angle = pos / np.power(10000.0, two_i / embed_dim)
    pe = np.zeros((seq_len, embed_dim))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle[:, : embed_dim // 2])
    pe.flags.writeable = False
    return pe


def positional_encoding(seq_len: int, embed_dim: int) -> Tensor:
    """Sinusoidal position table of shape ``(seq_len, embed_dim)``."""
    if seq_len < 1 or embed_dim < 1:
        raise ValueError("seq_len and embed_dim must be positive")
    return Tensor(_positional_table(seq_len, embed_dim))


def scaled_dot_product_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    mask: np.ndarray | None = None,
    return_weights: bool = False,
):
    """``softmax(q k^T / sqrt(d) + mask) v``.

    ``mask`` is boolean, broadcastable to the score shape, and ``True`` marks
    blocked positions (they receive ``-inf`` before the softmax).
    """
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError(f"query/key dims differ: {q.shape} vs {k.shape}")
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"key/value lengths differ: {k.shape} vs {v.shape}")
    d = q.shape[-1]
    scores = matmul(q, k.swapaxes(-1, -2)) * (1.0 / math.sqrt(d))
    if mask is not None:
        scores = masked_fill(scores, mask, -np.inf)
    weights = softmax(scores, axis=-1)
    out = matmul(weights, v)
    if return_weights:
        return out, weights
    return out


def causal_mask(n: int) -> np.ndarray:
    return np.triu(np.ones((n, n), dtype=bool), k=1)


class MultiHeadAttention(Module):
    def __init__(self, embed_dim: int, n_heads: int, rng: np.random.Generator):
        if embed_dim % n_heads:
            raise ValueError(f"embed_dim {embed_dim} not divisible by n_heads {n_heads}")
        self.n_heads = n_heads
        self.q_proj = Linear(embed_dim, embed_dim, rng)
        self.k_proj = Linear(embed_dim, embed_dim, rng)
        self.v_proj = Linear(embed_dim, embed_dim, rng)
        self.out_proj = Linear(embed_dim, embed_dim, rng)
        self.last_weights: np.ndarray | None = None

    def _split(self, x: Tensor) -> Tensor:
        b, t, d = x.shape
        return x.reshape(b, t, self.n_heads, d // self.n_heads).transpose(0, 2, 1, 3)

    def __call__(self, x: Tensor, memory: Tensor, mask: np.ndarray | None = None) -> Tensor:
        b, t, d = x.shape
        q = self._split(self.q_proj(x))
        k = self._split(self.k_proj(memory))
        v = self._split(self.v_proj(memory))
        out, w = scaled_dot_product_attention(q, k, v, mask, return_weights=True)
        self.last_weights = w.data
        out = out.transpose(0, 2, 1, 3).reshape(b, t, d)
        return self.out_proj(out)


class FeedForward(Module):
    def __init__(self, embed_dim: int, ff_dim: int, rng: np.random.Generator):
        self.fc1 = Linear(embed_dim, ff_dim, rng)
        self.fc2 = Linear(ff_dim, embed_dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).relu())


class EncoderLayer(Module):
    """Pre-norm self-attention + feed-forward block with residuals."""

    def __init__(self, embed_dim, n_heads, ff_dim, dropout_rate, rng):
        self.norm1 = LayerNorm(embed_dim)
        self.attn = MultiHeadAttention(embed_dim, n_heads, rng)
        self.norm2 = LayerNorm(embed_dim)
        self.ff = FeedForward(embed_dim, ff_dim, rng)
        self.dropout_rate = dropout_rate
        self.rng = rng

    def _drop(self, x):
        return dropout(x, self.dropout_rate, self.rng, self.training)

    def __call__(self, x: Tensor, mask: np.ndarray | None) -> Tensor:
        h = self.norm1(x)
        x = x + self._drop(self.attn(h, h, mask))
        return x + self._drop(self.ff(self.norm2(x)))


class DecoderLayer(Module):
    """Pre-norm causal self-attention, cross-attention and feed-forward."""

    def __init__(self, embed_dim, n_heads, ff_dim, dropout_rate, rng):
        self.norm1 = LayerNorm(embed_dim)
        self.self_attn = MultiHeadAttention(embed_dim, n_heads, rng)
        self.norm2 = LayerNorm(embed_dim)
        self.cross_attn = MultiHeadAttention(embed_dim, n_heads, rng)
        self.norm3 = LayerNorm(embed_dim)
        self.ff = FeedForward(embed_dim, ff_dim, rng)
        self.dropout_rate = dropout_rate
        self.rng = rng

    def _drop(self, x):
        return dropout(x, self.dropout_rate, self.rng, self.training)

    def __call__(self, x, memory, self_mask, memory_mask) -> Tensor:
        h = self.norm1(x)
        x = x + self._drop(self.self_attn(h, h, self_mask))
        x = x + self._drop(self.cross_attn(self.norm2(x), memory, memory_mask))
        return x + self._drop(self.ff(self.norm3(x)))
