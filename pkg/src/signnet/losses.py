"""Training losses: pose regression, triplet metric loss, CTC recognition and
sentence translation, plus their weighted totals."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, _make, getitem, no_grad, prod

LOSS_FORMS = ("complement", "log")


@dataclass(frozen=True)
class LossWeights:
    lambda_a: float = 5.0
    lambda_b: float = 5.0
    lambda_c: float = 100.0
    lambda_d: float = 100.0

    def __post_init__(self):
        for name in ("lambda_a", "lambda_b", "lambda_c", "lambda_d"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass
class TripletBatch:
    """One (baseline, truth-like, false) triple of pooled embeddings."""

    baseline: np.ndarray
    truth: Tensor
    false: np.ndarray
    margin: float = 0.2
    index: int = 0
    false_index: int = 1


def _check_form(form: str) -> None:
    if form not in LOSS_FORMS:
        raise ValueError(f"loss form must be one of {LOSS_FORMS}, got {form!r}")


def mse_loss(pred: Tensor, truth, mask: np.ndarray | None = None) -> Tensor:
    """Mean squared error over all entries.

    With ``mask`` (boolean, ``pred.shape[:-1]``), only unmasked frames count
    and the mean is taken over their ``frames x coordinates`` entries.
    """
    truth = truth.data if isinstance(truth, Tensor) else np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"mse_loss shape mismatch: {pred.shape} vs {truth.shape}")
    diff = pred - truth
    if mask is None:
        return (diff * diff).mean()
    w = np.asarray(mask, dtype=np.float64)[..., None]
    count = w.sum() * pred.shape[-1]
    if count == 0:
        raise ValueError("mse_loss mask selects no entries")
    return (diff * diff * w).sum() * (1.0 / count)


def pool_embedding(seq):
    """Temporal mean over the first axis of a ``(T, D)`` sequence."""
    if isinstance(seq, Tensor):
        if seq.ndim != 2 or seq.shape[0] == 0:
            raise ValueError("pool_embedding needs a non-empty (T, D) sequence")
        return seq.mean(axis=0)
    arr = np.asarray(seq, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0:
        raise ValueError("pool_embedding needs a non-empty (T, D) sequence")
    return arr.mean(axis=0)


def _sqdist(a, b):
    d = a - b
    return (d * d).sum()


def triplet_distance(baseline, truth, false, margin: float = 0.2):
    """``max(d(B,T) - d(B,S) + margin, 0)`` with squared Euclidean ``d``."""
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    shapes = {np.shape(x.data if isinstance(x, Tensor) else x) for x in (baseline, truth, false)}
    if len(shapes) != 1:
        raise ValueError(f"triplet embeddings differ in shape: {sorted(shapes)}")
    if not any(isinstance(x, Tensor) for x in (baseline, truth, false)):
        b, t, s = (np.asarray(x, dtype=np.float64) for x in (baseline, truth, false))
        return max(float(_sqdist(b, t) - _sqdist(b, s)) + margin, 0.0)
    b, t, s = (x if isinstance(x, Tensor) else Tensor(x) for x in (baseline, truth, false))
    return (_sqdist(b, t) - _sqdist(b, s) + margin).relu()


def select_triplets(
    pairs: Sequence[tuple],
    rng: np.random.Generator,
    margin: float = 0.2,
    mining: str = "random",
    embed: Callable[[Tensor], Tensor] | None = None,
) -> list[TripletBatch]:
    """Build one triplet per sample from ``(ground_truth, prediction)`` pairs.

    The baseline is the pooled ground truth, the truth-like sample the pooled
    prediction, and the false sample the pooled ground truth of another
    sample ``j != i``: drawn uniformly (``mining="random"``) or the closest
    one to the baseline (``mining="hardest"``). Ground-truth embeddings carry
    no gradient. ``embed`` optionally maps pooled poses into another space.
    """
    n = len(pairs)
    if n < 2:
        raise ValueError("select_triplets needs a batch of at least 2 samples")
    if mining not in ("random", "hardest"):
        raise ValueError(f"unknown mining mode {mining!r}")
    with no_grad():
        base = []
        for truth, _ in pairs:
            v = pool_embedding(truth.data if isinstance(truth, Tensor) else truth)
            base.append(embed(Tensor(v)).data if embed is not None else v)
        base = np.stack(base)
    if mining == "random":
        draws = rng.integers(0, n - 1, size=n)
        false_idx = draws + (draws >= np.arange(n))
    else:
        d = ((base[:, None, :] - base[None, :, :]) ** 2).sum(-1)
        np.fill_diagonal(d, np.inf)
        false_idx = d.argmin(axis=1)
    out = []
    for i, (_, pred) in enumerate(pairs):
        t = pool_embedding(pred if isinstance(pred, Tensor) else Tensor(pred))
        if embed is not None:
            t = embed(t)
        j = int(false_idx[i])
        out.append(TripletBatch(base[i], t, base[j], margin, i, j))
    return out


def metric_loss(triplets: Sequence[TripletBatch]) -> Tensor:
    """Sum (not mean) of triplet distances over the batch."""
    if not triplets:
        raise ValueError("metric_loss needs at least one triplet")
    total = None
    for tr in triplets:
        d = triplet_distance(tr.baseline, tr.truth, tr.false, tr.margin)
        if not isinstance(d, Tensor):
            d = Tensor(d)
        total = d if total is None else total + d
    return total


# ------------------------------------------------------------------------ CTC
def ctc_feasible(n_frames: int, target: Sequence[int]) -> bool:
    target = list(target)
    repeats = sum(1 for a, b in zip(target, target[1:]) if a == b)
    return len(target) + repeats <= n_frames


def _ctc_tables(logy: np.ndarray, target: Sequence[int], blank: int):
    n_frames = logy.shape[0]
    ext = np.full(2 * len(target) + 1, blank, dtype=np.int64)
    ext[1::2] = target
    n_states = ext.size
    # skip transition s-2 -> s allowed onto a label that differs from s-2
    skip = np.zeros(n_states, dtype=bool)
    skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    ly = logy[:, ext]
    alpha_bar = np.full((n_frames, n_states), -np.inf)
    alpha = np.full((n_frames, n_states), -np.inf)
    alpha_bar[0, : min(2, n_states)] = 0.0
    alpha[0] = alpha_bar[0] + ly[0]
    for t in range(1, n_frames):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        acc[2:] = np.where(skip[2:], np.logaddexp(acc[2:], prev[:-2]), acc[2:])
        alpha_bar[t] = acc
        alpha[t] = acc + ly[t]

    beta = np.full((n_frames, n_states), -np.inf)
    beta[-1, -1] = 0.0
    if n_states > 1:
        beta[-1, -2] = 0.0
    for t in range(n_frames - 2, -1, -1):
        nxt = beta[t + 1] + ly[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        acc[:-2] = np.where(skip[2:], np.logaddexp(acc[:-2], nxt[2:]), acc[:-2])
        beta[t] = acc
    end = alpha[-1, -1] if n_states == 1 else np.logaddexp(alpha[-1, -1], alpha[-1, -2])
    return ext, alpha_bar, beta, float(end)


def ctc_log_probability(frame_probs, target: Sequence[int], blank: int = 0) -> Tensor:
    """Log of the total probability of all blank-augmented paths that collapse
    to ``target``. ``-inf`` when no path fits in the available frames."""
    probs = frame_probs if isinstance(frame_probs, Tensor) else Tensor(frame_probs)
    if probs.ndim != 2 or probs.shape[0] == 0:
        raise ValueError("frame_probs must be a non-empty (T, C) array")
    target = [int(g) for g in target]
    if any(g == blank or g < 0 or g >= probs.shape[1] for g in target):
        raise ValueError("target contains blank or out-of-range labels")
    y = probs.data
    if not ctc_feasible(y.shape[0], target):
        return _make(np.array(-np.inf), (probs,), lambda g: (np.zeros_like(y),))
    with np.errstate(divide="ignore"):
        logy = np.log(y)
    ext, alpha_bar, beta, logp = _ctc_tables(logy, target, blank)

    def back(g):
        grad = np.zeros_like(y)
        if np.isfinite(logp):
            occ = np.exp(alpha_bar + beta - logp)
            np.add.at(grad.T, ext, occ.T)
        return (g * grad,)

    return _make(np.array(logp), (probs,), back)


def ctc_probability(frame_probs, target: Sequence[int], blank: int = 0) -> Tensor:
    return ctc_log_probability(frame_probs, target, blank).exp()


def recognition_loss(frame_probs, target: Sequence[int], form: str = "complement", blank: int = 0) -> Tensor:
    """``1 - p(G|V)`` (complement form) or ``-log p(G|V)`` (log form)."""
    _check_form(form)
    logp = ctc_log_probability(frame_probs, target, blank)
    if form == "log":
        return -logp
    return 1.0 - logp.exp()


def translation_loss(z: Tensor, target: Sequence[int], form: str = "complement") -> Tensor:
    """``1 - prod_i Z[i, target_i]`` (complement form) or its negative log."""
    _check_form(form)
    target = np.asarray(target, dtype=np.int64)
    if z.ndim != 2 or z.shape[0] != target.size:
        raise ValueError(
            f"translation_loss: {z.shape[0] if z.ndim else 0} steps vs target length {target.size}"
        )
    picked = getitem(z, (np.arange(target.size), target))
    if form == "log":
        return -(picked.log().sum())
    return 1.0 - prod(picked)


def total_text2pose_loss(loss_a, loss_b, weights: LossWeights):
    return weights.lambda_a * loss_a + weights.lambda_b * loss_b


def total_pose2text_loss(loss_c, loss_d, weights: LossWeights):
    return weights.lambda_c * loss_c + weights.lambda_d * loss_d
