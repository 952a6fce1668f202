"""Dynamic time warping over pose sequences and corpus-level BLEU."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


@dataclass
class DtwResult:
    cost: float
    path: list[tuple[int, int]]

    @property
    def normalized_cost(self) -> float:
        return self.cost / len(self.path)


def euclidean(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.sum((np.asarray(a) - np.asarray(b)) ** 2)))


def _pairwise_euclidean(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = a.reshape(len(a), -1)
    b = b.reshape(len(b), -1)
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    d = np.sqrt(np.maximum(sq, 0.0))
    # the expansion above loses exactness near zero; recompute those exactly
    close = d < 1e-6
    if close.any():
        for i, j in zip(*np.nonzero(close)):
            d[i, j] = euclidean(a[i], b[j])
    return d


def dtw(a, b, frame_dist: Callable | None = None) -> DtwResult:
    """Minimal-cost monotone alignment of two non-empty sequences.

    Frames are compared with Euclidean distance unless ``frame_dist`` is
    given. Ties during traceback prefer the diagonal step, then the vertical
    ``(i-1, j)`` step, then the horizontal ``(i, j-1)`` step.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("dtw needs two non-empty sequences")
    n, m = len(a), len(b)
    if frame_dist is None:
        cost = _pairwise_euclidean(a, b)
    else:
        cost = np.array([[frame_dist(a[i], b[j]) for j in range(m)] for i in range(n)], dtype=np.float64)
    if (cost < 0).any():
        raise ValueError("frame distance must be nonnegative")

    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        row, prev = acc[i], acc[i - 1]
        c = cost[i - 1]
        for j in range(1, m + 1):
            row[j] = c[j - 1] + min(prev[j - 1], prev[j], row[j - 1])

    path = [(n - 1, m - 1)]
    i, j = n, m
    while (i, j) != (1, 1):
        candidates = ((acc[i - 1, j - 1], i - 1, j - 1), (acc[i - 1, j], i - 1, j), (acc[i, j - 1], i, j - 1))
        best = min(c[0] for c in candidates)
        for value, pi, pj in candidates:
            if value == best:
                i, j = pi, pj
                break
        path.append((i - 1, j - 1))
    path.reverse()
    return DtwResult(float(acc[n, m]), path)


# ----------------------------------------------------------------------- BLEU
def tokenize(text: str) -> list[str]:
    """Whitespace tokenisation of lower-cased text."""
    return text.lower().split()


def _ngrams(tokens: Sequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class BleuReport:
    bleu: list[float]
    precisions: list[float]
    brevity_penalty: float
    candidate_length: int = 0
    reference_length: int = 0
    matches: list[int] = field(default_factory=list)
    totals: list[int] = field(default_factory=list)

    def format(self) -> str:
        lines = [
            "tokenizer: whitespace, lowercase",
            *(f"BLEU-{n}: {v:.4f}" for n, v in enumerate(self.bleu, 1)),
            *(f"precision-{n}: {v:.4f}" for n, v in enumerate(self.precisions, 1)),
            f"brevity_penalty: {self.brevity_penalty:.4f}",
            f"candidate_length: {self.candidate_length}",
            f"reference_length: {self.reference_length}",
        ]
        return "\n".join(lines)


def corpus_bleu(candidates: Sequence, references: Sequence, max_order: int = 4) -> BleuReport:
    """Single-reference corpus BLEU-1..4 without smoothing.

    Sentences may be strings (tokenised with :func:`tokenize`) or token lists.
    """
    if len(candidates) != len(references):
        raise ValueError(f"{len(candidates)} candidates vs {len(references)} references")
    if not candidates:
        raise ValueError("empty corpus")
    matches = [0] * max_order
    totals = [0] * max_order
    c_len = r_len = 0
    for cand, ref in zip(candidates, references):
        cand = tokenize(cand) if isinstance(cand, str) else list(cand)
        ref = tokenize(ref) if isinstance(ref, str) else list(ref)
        c_len += len(cand)
        r_len += len(ref)
        for n in range(1, max_order + 1):
            cc = _ngrams(cand, n)
            rc = _ngrams(ref, n)
            matches[n - 1] += sum(min(k, rc[g]) for g, k in cc.items())
            totals[n - 1] += max(len(cand) - n + 1, 0)
    precisions = [m / t if t else 0.0 for m, t in zip(matches, totals)]
    if c_len == 0:
        bp = 0.0
    elif c_len < r_len:
        bp = math.exp(1.0 - r_len / c_len)
    else:
        bp = 1.0
    bleu = []
    for n in range(1, max_order + 1):
        ps = precisions[:n]
        if min(ps) == 0.0:
            bleu.append(0.0)
        else:
            bleu.append(bp * math.exp(sum(math.log(p) for p in ps) / n))
    return BleuReport(bleu, precisions, bp, c_len, r_len, matches, totals)
