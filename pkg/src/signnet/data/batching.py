from __future__ import annotations

from typing import Sequence

import numpy as np

from .poses import POSE_DIM


def make_batches(corpus: Sequence, batch_size: int, seed: int) -> list[list[int]]:
    """Shuffled index batches for one epoch.

    A trailing batch smaller than 2 is merged into the previous one, since the
    triplet loss needs an in-batch negative.
    """
    if batch_size < 2:
        raise ValueError("batch_size must be >= 2")
    n = len(corpus)
    if n < 2:
        raise ValueError("need at least 2 samples to form a batch")
    order = np.random.default_rng(seed).permutation(n)
    batches = [order[i : i + batch_size].tolist() for i in range(0, n, batch_size)]
    if len(batches) > 1 and len(batches[-1]) < 2:
        batches[-2].extend(batches.pop())
    return batches


def pad_tokens(seqs: Sequence[Sequence[int]], pad_id: int) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad id sequences; returns ``(ids, pad_mask)`` with ``True`` on padding."""
    width = max(len(s) for s in seqs)
    ids = np.full((len(seqs), width), pad_id, dtype=np.int64)
    mask = np.ones((len(seqs), width), dtype=bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = s
        mask[i, : len(s)] = False
    return ids, mask


def pad_frames(seqs: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad ``(T_i, D)`` arrays with zeros; returns ``(frames, pad_mask)``."""
    width = max(len(s) for s in seqs)
    dim = seqs[0].shape[1]
    out = np.zeros((len(seqs), width, dim))
    mask = np.ones((len(seqs), width), dtype=bool)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = s
        mask[i, : len(s)] = False
    return out, mask


def shift_frames(seq: np.ndarray) -> np.ndarray:
    """Teacher-forcing decoder input: an all-zero start frame then ``seq[:-1]``."""
    return np.concatenate([np.zeros((1, POSE_DIM)), seq[:-1]], axis=0)
