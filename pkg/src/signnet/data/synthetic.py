"""Seeded synthetic sign corpus.

Every word owns a smooth pose motif: the upper-body skeleton template with
low-frequency sinusoidal offsets on the arm joints (hands follow their wrist
and curl their fingers). A sentence's pose is the concatenation of its words'
motifs plus Gaussian noise; its gloss is the word sequence mapped through an
injective word -> gloss table.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import CorpusSample
from .poses import BODY_JOINTS, LEFT_HAND, N_JOINTS, POSE_DIM, RIGHT_HAND

_WORDS = [
    "rain", "sun", "wind", "cloud", "snow", "storm", "fog", "frost",
    "warm", "cold", "north", "south", "east", "west", "today", "tomorrow",
    "evening", "morning", "weak", "strong", "dry", "wet", "sky", "weather",
]


def word_list(vocab_size: int) -> list[str]:
    if vocab_size <= len(_WORDS):
        return _WORDS[:vocab_size]
    return _WORDS + [f"word{i}" for i in range(len(_WORDS), vocab_size)]


def gloss_of(word: str) -> str:
    return word.upper()


@dataclass(frozen=True)
class SyntheticSpec:
    vocab_size: int = 12
    motif_len: tuple[int, int] = (5, 10)
    noise_std: float = 0.01
    confusable_pairs: tuple[tuple[int, int], ...] = ()
    confusable_offset: float = 0.05
    sentence_len: tuple[int, int] = (2, 4)
    seed: int = 0
    motion_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "motif_len", tuple(self.motif_len))
        object.__setattr__(self, "sentence_len", tuple(self.sentence_len))
        object.__setattr__(self, "confusable_pairs", tuple(tuple(p) for p in self.confusable_pairs))
        if self.vocab_size < 2:
            raise ValueError("vocab_size: must be >= 2")
        lo, hi = self.motif_len
        if not 1 <= lo <= hi:
            raise ValueError("motif_len: need 1 <= min <= max")
        lo, hi = self.sentence_len
        if not 1 <= lo <= hi:
            raise ValueError("sentence_len: need 1 <= min <= max")
        if self.noise_std < 0:
            raise ValueError("noise_std: must be nonnegative")
        if self.confusable_offset < 0:
            raise ValueError("confusable_offset: must be nonnegative")
        used = set()
        for pair in self.confusable_pairs:
            if len(pair) != 2 or pair[0] == pair[1]:
                raise ValueError(f"confusable_pairs: invalid pair {pair}")
            for w in pair:
                if not 0 <= w < self.vocab_size:
                    raise ValueError(f"confusable_pairs: word index {w} out of range")
            if pair[1] in used:
                raise ValueError(f"confusable_pairs: word {pair[1]} perturbed twice")
            used.add(pair[1])

    @classmethod
    def with_confusable(cls, n_pairs: int, **kwargs) -> SyntheticSpec:
        """Spec whose first ``2 * n_pairs`` words form confusable pairs."""
        return cls(confusable_pairs=tuple((2 * k, 2 * k + 1) for k in range(n_pairs)), **kwargs)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> SyntheticSpec:
        return cls(**json.loads(text))


def template_skeleton() -> np.ndarray:
    """Neutral ``(50, 3)`` upper-body pose, arms down, hands open."""
    sk = np.zeros((N_JOINTS, 3))
    body = {
        "nose": (0.0, 0.25, 0.05),
        "neck": (0.0, 0.0, 0.0),
        "right_shoulder": (-0.2, 0.0, 0.0),
        "right_elbow": (-0.27, -0.25, 0.05),
        "right_wrist": (-0.22, -0.45, 0.15),
        "left_shoulder": (0.2, 0.0, 0.0),
        "left_elbow": (0.27, -0.25, 0.05),
        "left_wrist": (0.22, -0.45, 0.15),
    }
    for i, name in enumerate(BODY_JOINTS):
        sk[i] = body[name]
    for root, wrist, side in ((LEFT_HAND, 7, 1.0), (RIGHT_HAND, 4, -1.0)):
        sk[root] = sk[wrist]
        for finger in range(5):
            angle = np.deg2rad(-60 + 30 * finger) * side
            direction = np.array([np.sin(angle), -np.cos(angle), 0.0])
            for k in range(1, 5):
                sk[root + 4 * finger + k] = sk[wrist] + direction * (0.03 + 0.02 * k)
    return sk


_ARM_AMPLITUDE = {2: 0.02, 3: 0.12, 4: 0.3, 5: 0.02, 6: 0.12, 7: 0.3, 0: 0.03, 1: 0.01}


def _motif(rng: np.random.Generator, length: int, template: np.ndarray, scale: float) -> np.ndarray:
    t = np.arange(length) / max(length - 1, 1)
    pose = np.repeat(template[None], length, axis=0)
    offsets = {}
    for joint, amp in _ARM_AMPLITUDE.items():
        a = rng.uniform(0.3, 1.0, 3) * amp * scale
        freq = rng.choice([0.5, 1.0], 3)
        phase = rng.uniform(0, 2 * np.pi, 3)
        shift = rng.uniform(-0.5, 0.5, 3) * amp * scale
        offsets[joint] = shift + a * np.sin(2 * np.pi * freq * t[:, None] + phase)
        pose[:, joint] += offsets[joint]
    for root, wrist in ((LEFT_HAND, 7), (RIGHT_HAND, 4)):
        curl_phase = rng.uniform(0, 2 * np.pi, 5)
        curl_amp = rng.uniform(0.2, 0.8, 5)
        for finger in range(5):
            curl = curl_amp[finger] * (0.5 + 0.5 * np.sin(2 * np.pi * t + curl_phase[finger]))
            for k in range(1, 5):
                j = root + 4 * finger + k
                rel = template[j] - template[root]
                pose[:, j] = template[root] + rel * (1.0 - curl[:, None] * k / 5.0)
        pose[:, root : root + 21] += offsets[wrist][:, None, :]
    return pose.reshape(length, POSE_DIM)


def word_motifs(spec: SyntheticSpec) -> dict[str, np.ndarray]:
    """Deterministic motif per word, including confusable perturbations."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    template = template_skeleton()
    words = word_list(spec.vocab_size)
    lo, hi = spec.motif_len
    motifs = {}
    for w in words:
        length = int(rng.integers(lo, hi + 1))
        motifs[w] = _motif(rng, length, template, spec.motion_scale)
    for a, b in spec.confusable_pairs:
        delta = rng.uniform(-spec.confusable_offset, spec.confusable_offset, POSE_DIM)
        motifs[words[b]] = motifs[words[a]] + delta
    return motifs


def generate_synthetic_corpus(spec: SyntheticSpec, n_samples: int, id_prefix: str = "s") -> list[CorpusSample]:
    """``n_samples`` seeded samples; a pure function of ``(spec, n_samples)``.

    Sentences cycle through the confusable pairs first so that both members
    of each pair are represented.
    """
    if n_samples < 1:
        raise ValueError("n_samples: must be >= 1")
    words = word_list(spec.vocab_size)
    motifs = word_motifs(spec)
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 2]))
    forced = [w for pair in spec.confusable_pairs for w in pair]
    lo, hi = spec.sentence_len
    samples = []
    for k in range(n_samples):
        length = int(rng.integers(lo, hi + 1))
        idx = list(rng.integers(0, len(words), length))
        if k < len(forced):
            idx[int(rng.integers(0, length))] = forced[k]
        sentence = [words[i] for i in idx]
        pose = np.concatenate([motifs[w] for w in sentence], axis=0)
        if spec.noise_std > 0:
            pose = pose + rng.normal(0.0, spec.noise_std, pose.shape)
        samples.append(CorpusSample(f"{id_prefix}{k:05d}", sentence, [gloss_of(w) for w in sentence], pose))
    return samples
