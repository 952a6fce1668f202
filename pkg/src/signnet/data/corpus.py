"""Corpus samples, the dataset-adapter slot and the TSV manifest format.

Manifest lines are UTF-8 ``id<TAB>sentence<TAB>gloss<TAB>pose-path`` with
pose paths relative to the manifest's directory.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Protocol, Sequence

import numpy as np

from .poses import PoseFormatError, check_pose_sequence, load_pose, save_pose


@dataclass
class CorpusSample:
    id: str
    sentence: list[str]
    gloss: list[str]
    pose: np.ndarray

    def __post_init__(self):
        self.pose = check_pose_sequence(self.pose, name=self.id)
        if not self.sentence:
            raise ValueError(f"{self.id}: empty sentence")
        if len(self.gloss) > len(self.pose):
            raise ValueError(f"{self.id}: gloss length {len(self.gloss)} exceeds {len(self.pose)} frames")

    @property
    def text(self) -> str:
        return " ".join(self.sentence)


class DatasetAdapter(Protocol):
    """Anything mapping sample ids to :class:`CorpusSample` (e.g. a loader for
    a real sign-language corpus)."""

    def ids(self) -> Sequence[str]: ...

    def __getitem__(self, sample_id: str) -> CorpusSample: ...


class InMemoryDataset:
    def __init__(self, samples: Sequence[CorpusSample]):
        self._samples = {s.id: s for s in samples}
        if len(self._samples) != len(samples):
            raise ValueError("duplicate sample ids")

    def ids(self) -> list[str]:
        return list(self._samples)

    def __getitem__(self, sample_id: str) -> CorpusSample:
        return self._samples[sample_id]

    def __iter__(self) -> Iterator[CorpusSample]:
        return iter(self._samples.values())

    def __len__(self) -> int:
        return len(self._samples)


class ManifestError(ValueError):
    pass


def write_manifest(path, samples: Sequence[CorpusSample], pose_dir: str = "poses", binary: bool = False) -> Path:
    path = Path(path)
    root = path.parent
    (root / pose_dir).mkdir(parents=True, exist_ok=True)
    suffix = ".psb" if binary else ".pose"
    lines = []
    for s in samples:
        rel = f"{pose_dir}/{s.id}{suffix}"
        save_pose(root / rel, s.pose, binary=binary)
        lines.append("\t".join([s.id, " ".join(s.sentence), " ".join(s.gloss), rel]))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_manifest(path) -> list[CorpusSample]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc.strerror}") from None
    samples = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise ManifestError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(fields)}")
        sid, sentence, gloss, rel = fields
        try:
            pose = load_pose(path.parent / rel)
        except OSError as exc:
            raise ManifestError(f"{path}:{lineno}: cannot read pose file {rel}: {exc.strerror}") from None
        except PoseFormatError as exc:
            raise ManifestError(f"{path}:{lineno}: {rel}: {exc}") from None
        try:
            samples.append(CorpusSample(sid, sentence.split(), gloss.split(), pose))
        except ValueError as exc:
            raise ManifestError(f"{path}:{lineno}: {exc}") from None
    return samples
