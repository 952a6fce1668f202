"""Text-to-pose generator and pose-to-text evaluation model."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..tensor import Tensor, dropout, embedding, no_grad, softmax
from .layers import (
    DecoderLayer,
    EncoderLayer,
    LayerNorm,
    Linear,
    Module,
    causal_mask,
    parameter,
    positional_encoding,
)

POSE_DIM = 150
EOS_CHANNEL = POSE_DIM  # index of the stop logit in the 151-wide output


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 128
    n_heads: int = 4
    n_encoder_layers: int = 2
    n_decoder_layers: int = 2
    ff_dim: int | None = None
    dropout: float = 0.1
    max_seq_len: int = 512

    def __post_init__(self):
        for name in ("embed_dim", "n_heads", "max_seq_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.n_encoder_layers < 1 or self.n_decoder_layers < 1:
            raise ValueError("layer counts must be positive")
        if self.embed_dim % self.n_heads:
            raise ValueError(
                f"embed_dim {self.embed_dim} not divisible by n_heads {self.n_heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.ff_dim is None:
            object.__setattr__(self, "ff_dim", 4 * self.embed_dim)
        elif self.ff_dim < 1:
            raise ValueError("ff_dim must be positive")

    @classmethod
    def text2pose(cls, **overrides) -> ModelConfig:
        return cls(**{"n_encoder_layers": 2, "n_decoder_layers": 2, **overrides})

    @classmethod
    def pose2text(cls, **overrides) -> ModelConfig:
        return cls(**{"n_encoder_layers": 7, "n_decoder_layers": 2, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)


def _key_mask(pad_mask: np.ndarray | None) -> np.ndarray | None:
    # (B, Tk) -> (B, 1, 1, Tk) so it broadcasts over heads and queries
    if pad_mask is None:
        return None
    return np.asarray(pad_mask, dtype=bool)[:, None, None, :]


def _self_mask(length: int, pad_mask: np.ndarray | None) -> np.ndarray:
    mask = causal_mask(length)[None, None]
    km = _key_mask(pad_mask)
    return mask if km is None else mask | km


class _Seq2Seq(Module):
    config: ModelConfig

    def _build_stacks(self, rng):
        c = self.config
        self.encoder_layers = [
            EncoderLayer(c.embed_dim, c.n_heads, c.ff_dim, c.dropout, rng)
            for _ in range(c.n_encoder_layers)
        ]
        self.encoder_norm = LayerNorm(c.embed_dim)
        self.decoder_layers = [
            DecoderLayer(c.embed_dim, c.n_heads, c.ff_dim, c.dropout, rng)
            for _ in range(c.n_decoder_layers)
        ]
        self.decoder_norm = LayerNorm(c.embed_dim)

    def _check_length(self, n: int) -> None:
        if n < 1:
            raise ValueError("empty input sequence")
        if n > self.config.max_seq_len:
            raise ValueError(f"sequence length {n} exceeds max_seq_len {self.config.max_seq_len}")

    def _add_positions(self, x: Tensor) -> Tensor:
        pe = positional_encoding(x.shape[1], self.config.embed_dim)
        return dropout(x + pe, self.config.dropout, self.rng, self.training)

    def _run_encoder(self, x: Tensor, pad_mask) -> Tensor:
        mask = _key_mask(pad_mask)
        for layer in self.encoder_layers:
            x = layer(x, mask)
        return self.encoder_norm(x)

    def _run_decoder(self, x: Tensor, memory: Tensor, self_pad, memory_pad) -> Tensor:
        self_mask = _self_mask(x.shape[1], self_pad)
        mem_mask = _key_mask(memory_pad)
        for layer in self.decoder_layers:
            x = layer(x, memory, self_mask, mem_mask)
        return self.decoder_norm(x)

    def attention_weights(self) -> list[np.ndarray]:
        """Weights recorded by every attention block on the last forward pass."""
        out = []
        for layer in self.encoder_layers:
            out.append(layer.attn.last_weights)
        for layer in self.decoder_layers:
            out.extend([layer.self_attn.last_weights, layer.cross_attn.last_weights])
        return out


class Text2PoseModel(_Seq2Seq):
    """Token encoder + autoregressive pose-frame decoder.

    Each output frame has 151 values: 150 joint coordinates plus a stop logit.
    """

    def __init__(self, config: ModelConfig, vocab_size: int, seed: int = 0):
        self.config = config
        self.vocab_size = vocab_size
        self.rng = np.random.default_rng(seed)
        d = config.embed_dim
        self.token_embedding = parameter(self.rng.normal(0.0, 1.0, (vocab_size, d)))
        self.frame_embedding = Linear(POSE_DIM, d, self.rng)
        self._build_stacks(self.rng)
        self.output = Linear(d, POSE_DIM + 1, self.rng)

    def encode(self, tokens, pad_mask: np.ndarray | None = None) -> Tensor:
        """Contextual token embeddings ``(B, U, d)``; 1-D input gives ``(U, d)``."""
        tokens = np.asarray(tokens)
        single = tokens.ndim == 1
        if single:
            tokens = tokens[None]
        self._check_length(tokens.shape[1])
        if not np.issubdtype(tokens.dtype, np.integer):
            raise TypeError("token ids must be integers")
        if tokens.min() < 0 or tokens.max() >= self.vocab_size:
            bad = tokens[(tokens < 0) | (tokens >= self.vocab_size)][0]
            raise ValueError(f"unknown token id {int(bad)} (vocab size {self.vocab_size})")
        x = self._add_positions(embedding(self.token_embedding, tokens))
        out = self._run_encoder(x, pad_mask)
        return out[0] if single else out

    def decode(self, memory: Tensor, frames_in: Tensor, memory_pad=None, frame_pad=None) -> Tensor:
        """Raw ``(B, T, 151)`` outputs for the given (shifted) input frames."""
        self._check_length(frames_in.shape[1])
        x = self._add_positions(self.frame_embedding(frames_in))
        h = self._run_decoder(x, memory, frame_pad, memory_pad)
        return self.output(h)

    def __call__(self, tokens, frames_in, token_pad=None, frame_pad=None) -> Tensor:
        if not isinstance(frames_in, Tensor):
            frames_in = Tensor(frames_in)
        memory = self.encode(tokens, token_pad)
        return self.decode(memory, frames_in, token_pad, frame_pad)

    def embed_frames(self, frames: Tensor) -> Tensor:
        """Frame projection alone; a single ``(150,)`` vector maps to ``(D,)``."""
        if frames.ndim == 1:
            return self.frame_embedding(frames.reshape(1, -1)).reshape(-1)
        return self.frame_embedding(frames)


class Pose2TextModel(_Seq2Seq):
    """Pose encoder with a per-frame gloss head and a word decoder."""

    def __init__(self, config: ModelConfig, n_glosses: int, n_words: int, seed: int = 0):
        # n_glosses counts the blank symbol
        self.config = config
        self.n_glosses = n_glosses
        self.n_words = n_words
        self.rng = np.random.default_rng(seed)
        d = config.embed_dim
        self.frame_embedding = Linear(POSE_DIM, d, self.rng)
        self._build_stacks(self.rng)
        self.gloss_head = Linear(d, n_glosses, self.rng)
        self.word_embedding = parameter(self.rng.normal(0.0, 1.0, (n_words, d)))
        self.word_head = Linear(d, n_words, self.rng)

    def encode(self, frames, pad_mask: np.ndarray | None = None) -> Tensor:
        frames = frames if isinstance(frames, Tensor) else Tensor(frames)
        single = frames.ndim == 2
        if single:
            frames = frames.reshape(1, *frames.shape)
        self._check_length(frames.shape[1])
        if frames.shape[-1] != POSE_DIM:
            raise ValueError(f"frame width {frames.shape[-1]} != {POSE_DIM}")
        x = self._add_positions(self.frame_embedding(frames))
        out = self._run_encoder(x, pad_mask)
        return out[0] if single else out

    def gloss_probs(self, memory: Tensor) -> Tensor:
        return softmax(self.gloss_head(memory), axis=-1)

    def word_logits(self, memory: Tensor, words_in, memory_pad=None, word_pad=None) -> Tensor:
        words_in = np.asarray(words_in)
        self._check_length(words_in.shape[1])
        x = self._add_positions(embedding(self.word_embedding, words_in))
        h = self._run_decoder(x, memory, word_pad, memory_pad)
        return self.word_head(h)

    def word_probs(self, memory: Tensor, words_in, memory_pad=None, word_pad=None) -> Tensor:
        """Stepwise distributions ``Z`` of shape ``(B, U, n_words)``."""
        return softmax(self.word_logits(memory, words_in, memory_pad, word_pad), axis=-1)


# ----------------------------------------------------------------- inference
def _as_batch(memory: Tensor) -> tuple[Tensor, bool]:
    if memory.ndim == 2:
        return memory.reshape(1, *memory.shape), True
    return memory, False


def decode_pose_autoregressive(
    model: Text2PoseModel,
    encoder_out: Tensor,
    max_frames: int,
    memory_pad: np.ndarray | None = None,
) -> list[np.ndarray] | np.ndarray:
    """Greedy frame-by-frame generation from an all-zero start frame.

    A sequence stops on the first frame whose stop probability exceeds 0.5
    (that frame is kept) or after ``max_frames`` frames.
    """
    if max_frames < 1:
        raise ValueError("max_frames must be >= 1")
    memory, single = _as_batch(encoder_out)
    b = memory.shape[0]
    was_training = model.training
    model.eval()
    frames = np.zeros((b, 1, POSE_DIM))
    lengths = np.full(b, max_frames)
    done = np.zeros(b, dtype=bool)
    try:
        with no_grad():
            for t in range(max_frames):
                out = model.decode(memory, Tensor(frames), memory_pad).data[:, -1]
                stop = out[:, EOS_CHANNEL] > 0.0  # sigmoid(z) > 0.5
                frames = np.concatenate([frames, out[:, None, :POSE_DIM]], axis=1)
                newly = stop & ~done
                lengths[newly] = t + 1
                done |= stop
                if done.all():
                    break
    finally:
        model.train(was_training)
    seqs = [frames[i, 1 : 1 + lengths[i]].copy() for i in range(b)]
    return seqs[0] if single else seqs


def decode_text_autoregressive(
    model: Pose2TextModel,
    encoder_out: Tensor,
    max_words: int,
    bos_id: int,
    eos_id: int,
    memory_pad: np.ndarray | None = None,
    return_distributions: bool = False,
):
    """Greedy argmax decoding; returns word ids without BOS/EOS."""
    if max_words < 1:
        raise ValueError("max_words must be >= 1")
    memory, single = _as_batch(encoder_out)
    b = memory.shape[0]
    was_training = model.training
    model.eval()
    words = np.full((b, 1), bos_id, dtype=np.int64)
    done = np.zeros(b, dtype=bool)
    dists = []
    try:
        with no_grad():
            for _ in range(max_words):
                z = model.word_probs(memory, words, memory_pad).data[:, -1]
                dists.append(z)
                nxt = z.argmax(axis=-1)
                nxt[done] = eos_id
                words = np.concatenate([words, nxt[:, None]], axis=1)
                done |= nxt == eos_id
                if done.all():
                    break
    finally:
        model.train(was_training)
    out = []
    for row in words[:, 1:]:
        ids = []
        for w in row:
            if w == eos_id:
                break
            ids.append(int(w))
        out.append(ids)
    if return_distributions:
        dist = np.stack(dists, axis=1)
        return (out[0], dist[0]) if single else (out, dist)
    return out[0] if single else out


def gloss_probabilities(model: Pose2TextModel, frames) -> Tensor:
    """Per-frame distribution over glosses plus blank, shape ``(T, G+1)``."""
    frames = np.asarray(frames.data if isinstance(frames, Tensor) else frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError("gloss_probabilities needs a non-empty (T, 150) sequence")
    return model.gloss_probs(model.encode(frames))
