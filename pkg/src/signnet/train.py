"""Training entry points and the loss-weight grid harness.

The optimiser and plateau schedule live in :mod:`signnet.optim`; the
per-batch loops live on the estimators. This module adds a plain config
object, functional wrappers returning checkpoint bytes plus the epoch log,
and the (lambda_a, lambda_b) grid that back-translates every cell through one
fixed pose-to-text model.
"""
from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data.corpus import CorpusSample
from .estimators import SignNetPose2Text, SignNetText2Pose, TrainingDivergence
from .losses import LossWeights
from .metrics import corpus_bleu, dtw

logger = logging.getLogger(__name__)

DEFAULT_GRID: tuple[tuple[float, float], ...] = ((1, 10), (5, 1), (5, 5), (5, 10), (10, 5))
ARMS = ("G2P", "T2P")

_SELECTION = {"text2pose": "dtw", "pose2text": "dev loss"}


@dataclass(frozen=True)
class TrainConfig:
    """Everything a training run needs besides the data.

    ``model`` holds extra estimator keyword arguments (model dims, dropout,
    noise levels, ...); anything not named there keeps the estimator default.
    """

    weights: LossWeights = field(default_factory=LossWeights)
    batch_size: int = 8
    max_epochs: int = 100
    eval_every: int = 1
    early_stopping: int | None = None
    lr: float = 1e-3
    scheduler_factor: float = 0.5
    scheduler_patience: int = 5
    min_lr: float = 1e-6
    seed: int = 0
    model: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("batch_size", "max_epochs", "eval_every", "scheduler_patience"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.early_stopping is not None and self.early_stopping < 1:
            raise ValueError("early_stopping must be positive or None")
        if not 0.0 < self.scheduler_factor < 1.0:
            raise ValueError("scheduler_factor must be in (0, 1)")
        if self.lr <= 0 or self.min_lr < 0:
            raise ValueError("learning rates must be positive")

    def selection(self, kind: str) -> str:
        return _SELECTION[kind]

    def estimator_params(self, kind: str) -> dict:
        params = dict(
            batch_size=self.batch_size,
            max_epochs=self.max_epochs,
            eval_every=self.eval_every,
            early_stopping=self.early_stopping,
            lr=self.lr,
            scheduler_factor=self.scheduler_factor,
            scheduler_patience=self.scheduler_patience,
            min_lr=self.min_lr,
            random_state=self.seed,
        )
        if kind == "text2pose":
            params.update(lambda_a=self.weights.lambda_a, lambda_b=self.weights.lambda_b)
        else:
            params.update(lambda_c=self.weights.lambda_c, lambda_d=self.weights.lambda_d)
        params.update(self.model)
        return params

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        d = dict(d)
        if "weights" in d and not isinstance(d["weights"], LossWeights):
            d["weights"] = LossWeights(**d["weights"])
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**d)

    def with_weights(self, **kw) -> TrainConfig:
        return dataclasses.replace(self, weights=dataclasses.replace(self.weights, **kw))


@dataclass
class TrainResult:
    estimator: SignNetText2Pose | SignNetPose2Text
    checkpoint: bytes
    log: list[dict]

    def log_lines(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.log)


def _source(sample: CorpusSample, source: str) -> list[str]:
    if source == "text":
        return sample.sentence
    if source == "gloss":
        return sample.gloss
    raise ValueError(f"source must be 'text' or 'gloss', got {source!r}")


def _check_corpus(corpus: Sequence[CorpusSample]) -> list[CorpusSample]:
    corpus = list(corpus)
    if len(corpus) < 2:
        raise ValueError("corpus needs at least 2 samples")
    return corpus


def train_text2pose(corpus: Sequence[CorpusSample], config: TrainConfig = TrainConfig(), source: str = "text",
                    dev: Sequence[CorpusSample] | None = None, log_path=None) -> TrainResult:
    """Fit a pose generator on sentences (``source="text"``) or glosses."""
    corpus = _check_corpus(corpus)
    est = SignNetText2Pose(**config.estimator_params("text2pose"), log_path=log_path)
    kw = {}
    if dev is not None:
        kw = dict(X_dev=[_source(s, source) for s in dev], y_dev=[s.pose for s in dev])
    est.fit([_source(s, source) for s in corpus], [s.pose for s in corpus], **kw)
    return TrainResult(est, est.to_bytes(), est.history_)


def train_pose2text(corpus: Sequence[CorpusSample], config: TrainConfig = TrainConfig(),
                    dev: Sequence[CorpusSample] | None = None, log_path=None) -> TrainResult:
    """Fit the back-translation model (CTC gloss head plus word decoder)."""
    corpus = _check_corpus(corpus)
    est = SignNetPose2Text(**config.estimator_params("pose2text"), log_path=log_path)
    kw = {}
    if dev is not None:
        kw = dict(X_dev=[s.pose for s in dev], y_dev=[s.sentence for s in dev],
                  glosses_dev=[s.gloss for s in dev])
    est.fit([s.pose for s in corpus], [s.sentence for s in corpus], glosses=[s.gloss for s in corpus], **kw)
    return TrainResult(est, est.to_bytes(), est.history_)


# --------------------------------------------------------------- evaluation
@dataclass
class EvalReport:
    """Back-translation results for a set of generated pose sequences."""

    ids: list[str]
    predictions: list[str]
    references: list[str]
    bleu: object
    mean_dtw: float | None = None
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate sample ids in report")
        if not len(self.ids) == len(self.predictions) == len(self.references):
            raise ValueError("ids, predictions and references differ in length")

    def format(self) -> str:
        """Header block, one tab-separated line per sample, summary block."""
        lines = ["# config"]
        lines += [f"{k}: {json.dumps(v, sort_keys=True)}" for k, v in sorted(self.config.items())]
        lines += ["# samples", "id\tprediction\treference"]
        lines += [f"{i}\t{p}\t{r}" for i, p, r in zip(self.ids, self.predictions, self.references)]
        lines += ["# summary", f"samples: {len(self.ids)}"]
        lines.append(self.bleu.format())
        lines.append("mean_dtw: " + ("n/a" if self.mean_dtw is None else f"{self.mean_dtw:.6f}"))
        return "\n".join(lines) + "\n"


def backtranslate(poses: dict[str, np.ndarray], p2t: SignNetPose2Text, references: dict[str, str],
                  truths: dict[str, np.ndarray] | None = None, config: dict | None = None) -> EvalReport:
    """Translate each pose sequence back to text and score it with corpus BLEU.

    ``references`` must cover every id in ``poses``. When ground-truth poses
    are supplied the mean length-normalised DTW cost is reported as well.
    """
    ids = sorted(poses)
    if not ids:
        raise ValueError("no pose sequences to evaluate")
    missing = [i for i in ids if i not in references]
    if missing:
        raise KeyError(f"no reference for ids: {', '.join(missing[:5])}")
    preds = p2t.predict([poses[i] for i in ids])
    refs = [references[i] for i in ids]
    mean_dtw = None
    if truths is not None:
        mean_dtw = float(np.mean([dtw(poses[i], truths[i]).normalized_cost for i in ids]))
    return EvalReport(ids, preds, refs, corpus_bleu(preds, refs), mean_dtw, dict(config or {}))


# ---------------------------------------------------------------- grid
@dataclass
class GridCell:
    arm: str
    lambda_a: float
    lambda_b: float
    bleu: list[float] | None = None
    mean_dtw: float | None = None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class GridReport:
    cells: list[GridCell]
    weights: list[tuple[float, float]]
    arms: tuple[str, ...] = ARMS

    def cell(self, arm: str, lambda_a: float, lambda_b: float) -> GridCell:
        for c in self.cells:
            if c.arm == arm and (c.lambda_a, c.lambda_b) == (lambda_a, lambda_b):
                return c
        raise KeyError((arm, lambda_a, lambda_b))

    @property
    def failed(self) -> list[GridCell]:
        return [c for c in self.cells if c.failed]

    def rows(self) -> list[dict]:
        out = []
        for la, lb in self.weights:
            row = {"lambda_a": la, "lambda_b": lb}
            for arm in self.arms:
                c = self.cell(arm, la, lb)
                for n in range(4):
                    row[f"{arm} BLEU-{n + 1}"] = None if c.failed else c.bleu[n]
            out.append(row)
        return out

    def format(self) -> str:
        header = ["lambda_a", "lambda_b"] + [f"{arm} BLEU-{n}" for arm in self.arms for n in range(1, 5)]
        lines = ["\t".join(header)]
        for row in self.rows():
            vals = [f"{row['lambda_a']:g}", f"{row['lambda_b']:g}"]
            vals += ["FAILED" if row[h] is None else f"{row[h] * 100:.2f}" for h in header[2:]]
            lines.append("\t".join(vals))
        for c in self.failed:
            lines.append(f"# failed {c.arm} ({c.lambda_a:g}, {c.lambda_b:g}): {c.error}")
        return "\n".join(lines) + "\n"


def grid_search(corpus: Sequence[CorpusSample], p2t: SignNetPose2Text,
                weight_grid: Iterable[tuple[float, float]] = DEFAULT_GRID,
                config: TrainConfig = TrainConfig(), arms: Sequence[str] = ARMS,
                eval_corpus: Sequence[CorpusSample] | None = None) -> GridReport:
    """Train a pose generator per (arm, lambda_a, lambda_b) cell and score it by
    back-translation through the fixed ``p2t`` model.

    Generation runs on ``eval_corpus`` (defaults to ``corpus``). A cell whose
    training fails is marked and the remaining cells still run.
    """
    weights = [(float(a), float(b)) for a, b in weight_grid]
    if not weights:
        raise ValueError("weight grid is empty")
    for arm in arms:
        if arm not in ARMS:
            raise ValueError(f"unknown arm {arm!r}; expected one of {ARMS}")
    corpus = _check_corpus(corpus)
    evals = list(eval_corpus) if eval_corpus is not None else corpus
    references = {s.id: s.text for s in evals}
    truths = {s.id: s.pose for s in evals}
    cells = []
    for arm in arms:
        source = "gloss" if arm == "G2P" else "text"
        for la, lb in weights:
            cell = GridCell(arm, la, lb)
            try:
                result = train_text2pose(corpus, config.with_weights(lambda_a=la, lambda_b=lb), source)
                generated = result.estimator.predict([_source(s, source) for s in evals])
                report = backtranslate(dict(zip((s.id for s in evals), generated)), p2t, references, truths)
                cell.bleu, cell.mean_dtw = list(report.bleu.bleu), report.mean_dtw
            except (TrainingDivergence, ValueError, FloatingPointError) as exc:
                cell.error = f"{type(exc).__name__}: {exc}"
                logger.warning("grid cell %s (%g, %g) failed: %s", arm, la, lb, exc)
            cells.append(cell)
    return GridReport(cells, weights, tuple(arms))
