"""Input checks shared by the estimators."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .data.poses import check_pose_sequence
from .metrics import tokenize


def check_sentences(X, name: str = "X") -> list[list[str]]:
    """Accept strings (whitespace-tokenised, lower-cased) or token lists."""
    if isinstance(X, str):
        raise TypeError(f"{name} must be a sequence of sentences, not a single string")
    out = []
    for i, s in enumerate(X):
        toks = tokenize(s) if isinstance(s, str) else [str(t) for t in s]
        if not toks:
            raise ValueError(f"{name}[{i}] is empty")
        out.append(toks)
    if not out:
        raise ValueError(f"{name} is empty")
    return out


def check_poses(y, name: str = "y") -> list[np.ndarray]:
    if isinstance(y, np.ndarray) and y.ndim == 2:
        raise TypeError(f"{name} must be a sequence of (T, 150) arrays")
    out = [check_pose_sequence(p, name=f"{name}[{i}]") for i, p in enumerate(y)]
    if not out:
        raise ValueError(f"{name} is empty")
    return out


def check_consistent_length(*arrays: Sequence) -> None:
    lengths = {len(a) for a in arrays if a is not None}
    if len(lengths) > 1:
        raise ValueError(f"inconsistent numbers of samples: {sorted(lengths)}")
