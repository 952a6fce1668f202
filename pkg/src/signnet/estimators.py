"""scikit-learn style estimators wrapping the two models and their training loops."""
from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .data.batching import make_batches, pad_frames, pad_tokens, shift_frames
from .data.vocab import GLOSS_RESERVED, WORD_RESERVED, Vocabulary
from .losses import (
    LossWeights,
    metric_loss,
    mse_loss,
    recognition_loss,
    select_triplets,
    translation_loss,
)
from .metrics import corpus_bleu, dtw
from .nn.checkpoint import CheckpointError, dumps_checkpoint, load_checkpoint
from .nn.models import (
    EOS_CHANNEL,
    POSE_DIM,
    ModelConfig,
    Pose2TextModel,
    Text2PoseModel,
    decode_pose_autoregressive,
    decode_text_autoregressive,
)
from .optim import Adam, PlateauScheduler
from .tensor import Tensor, binary_cross_entropy_with_logits, no_grad
from .validation import check_consistent_length, check_poses, check_sentences

logger = logging.getLogger(__name__)


class TrainingDivergence(RuntimeError):
    def __init__(self, epoch: int, batch: int, value: float):
        super().__init__(f"non-finite loss {value} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


def _float(x) -> float:
    return float(x.data) if isinstance(x, Tensor) else float(x)


class _SignNetEstimator(BaseEstimator):
    _kind = ""

    def _model_config(self) -> ModelConfig:
        return ModelConfig(
            embed_dim=self.embed_dim,
            n_heads=self.n_heads,
            n_encoder_layers=self.n_encoder_layers,
            n_decoder_layers=self.n_decoder_layers,
            ff_dim=self.ff_dim,
            dropout=self.dropout,
            max_seq_len=self.max_seq_len,
        )

    def _begin_fit(self):
        self.history_ = []
        self.batch_log_ = []
        self._log_file = None
        if self.log_path is not None:
            self._log_file = open(self.log_path, "w", encoding="utf-8")

    def _log_epoch(self, record: dict) -> None:
        self.history_.append(record)
        if self._log_file is not None:
            self._log_file.write(json.dumps(record, sort_keys=True) + "\n")
        if self.verbose:
            logger.info("%s epoch %d: %s", self._kind, record["epoch"], record)

    def _end_fit(self):
        if self._log_file is not None:
            self._log_file.close()
            self._log_file = None

    def _epoch_loop(self, train_step, evaluate, n_samples):
        """Shared epoch driver: shuffling, scheduling, dev selection."""
        rng = np.random.default_rng(self.random_state)
        optim = Adam(self.model_.parameters(), lr=self.lr)
        sched = PlateauScheduler(self.scheduler_factor, self.scheduler_patience, self.min_lr)
        best_state, self.best_score_, self.best_epoch_ = None, np.inf, -1
        since_best = 0
        for epoch in range(self.max_epochs):
            self.model_.train()
            sums: dict[str, float] = {}
            batches = make_batches(range(n_samples), self.batch_size, int(rng.integers(2**31)))
            for b, idx in enumerate(batches):
                optim.zero_grad()
                total, parts = train_step(idx, rng)
                value = _float(total)
                if not np.isfinite(value):
                    raise TrainingDivergence(epoch, b, value)
                total.backward()
                optim.step()
                parts["total"] = value
                self.batch_log_.append({"epoch": epoch, "batch": b, **parts})
                for k, v in parts.items():
                    sums[k] = sums.get(k, 0.0) + v
            record = {"epoch": epoch, "lr": optim.lr}
            record.update({k: v / len(batches) for k, v in sums.items()})
            last = epoch == self.max_epochs - 1
            dev = None
            if (epoch + 1) % self.eval_every == 0 or last:
                dev = evaluate()
                if dev < self.best_score_:
                    self.best_score_, self.best_epoch_ = dev, epoch
                    best_state = self.model_.state_dict()
                    since_best = 0
                else:
                    since_best += 1
                optim.lr = sched.step(dev, optim.lr)
            record[f"dev_{self._selection}"] = dev
            self._log_epoch(record)
            if self.early_stopping is not None and since_best >= self.early_stopping:
                break
        self.n_epochs_ = len(self.history_)
        if best_state is not None:
            self.model_.load_state_dict(best_state)
        self.model_.eval()

    # -------------------------------------------------------------- persistence
    def _vocabularies(self) -> dict:
        raise NotImplementedError

    def to_bytes(self) -> bytes:
        check_is_fitted(self, "model_")
        params = {k: v for k, v in self.get_params().items() if k != "log_path"}
        meta = {"best_epoch": int(self.best_epoch_), "best_score": float(self.best_score_),
                "n_epochs": int(self.n_epochs_), **self._extra_meta()}
        return dumps_checkpoint(self._kind, params, self.model_.state_dict(), self._vocabularies(), meta)

    def save(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    def _extra_meta(self) -> dict:
        return {}

    def _fit_scaler(self, poses: list[np.ndarray]) -> None:
        # per-coordinate standardisation; raw joint coordinates are small next
        # to the positional encodings and the models barely move without it
        stacked = np.concatenate(poses)
        self.pose_mean_ = stacked.mean(axis=0)
        self.pose_scale_ = np.maximum(stacked.std(axis=0), 1e-3)

    def _to_model(self, pose: np.ndarray) -> np.ndarray:
        return (pose - self.pose_mean_) / self.pose_scale_

    def _from_model(self, pose: np.ndarray) -> np.ndarray:
        return pose * self.pose_scale_ + self.pose_mean_

    def _scaler_meta(self) -> dict:
        return {"pose_mean": self.pose_mean_.tolist(), "pose_scale": self.pose_scale_.tolist()}

    def _restore_scaler(self, meta: dict) -> None:
        self.pose_mean_ = np.asarray(meta["pose_mean"], dtype=np.float64)
        self.pose_scale_ = np.asarray(meta["pose_scale"], dtype=np.float64)

    @classmethod
    def load(cls, path):
        ckpt = load_checkpoint(path)
        if ckpt["kind"] != cls._kind:
            raise CheckpointError(f"checkpoint holds a {ckpt['kind']!r} model, expected {cls._kind!r}")
        est = cls(**ckpt["config"])
        est._restore(ckpt)
        est.best_epoch_ = ckpt["meta"]["best_epoch"]
        est.best_score_ = ckpt["meta"]["best_score"]
        est.n_epochs_ = ckpt["meta"]["n_epochs"]
        est.model_.load_state_dict(ckpt["params"])
        est.model_.eval()
        return est


class SignNetText2Pose(_SignNetEstimator):
    """Token sequence -> continuous pose sequence generator.

    ``fit(X, y)`` takes sentences (strings or token lists; glosses for the
    gloss-to-pose arm) and ``(T, 150)`` pose arrays. Training minimises
    ``lambda_a * MSE + lambda_b * triplet loss + lambda_eos * stop BCE`` with
    teacher forcing; the dev-DTW-best epoch is kept.
    """

    _kind = "text2pose"
    _selection = "dtw"

    def __init__(
        self,
        embed_dim=128,
        n_heads=4,
        n_encoder_layers=2,
        n_decoder_layers=2,
        ff_dim=None,
        dropout=0.1,
        max_seq_len=512,
        lambda_a=5.0,
        lambda_b=5.0,
        lambda_eos=1.0,
        margin=0.2,
        mining="random",
        embedding_space="pose",
        lr=1e-3,
        batch_size=8,
        max_epochs=100,
        eval_every=1,
        early_stopping=None,
        scheduler_factor=0.5,
        scheduler_patience=5,
        min_lr=1e-6,
        max_frames=None,
        decoder_noise=0.0,
        scheduled_sampling=0.0,
        random_state=0,
        verbose=0,
        log_path=None,
    ):
        self.embed_dim = embed_dim
        self.n_heads = n_heads
        self.n_encoder_layers = n_encoder_layers
        self.n_decoder_layers = n_decoder_layers
        self.ff_dim = ff_dim
        self.dropout = dropout
        self.max_seq_len = max_seq_len
        self.lambda_a = lambda_a
        self.lambda_b = lambda_b
        self.lambda_eos = lambda_eos
        self.margin = margin
        self.mining = mining
        self.embedding_space = embedding_space
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.eval_every = eval_every
        self.early_stopping = early_stopping
        self.scheduler_factor = scheduler_factor
        self.scheduler_patience = scheduler_patience
        self.min_lr = min_lr
        self.max_frames = max_frames
        self.decoder_noise = decoder_noise
        self.scheduled_sampling = scheduled_sampling
        self.random_state = random_state
        self.verbose = verbose
        self.log_path = log_path

    # ------------------------------------------------------------------- fit
    def fit(self, X, y, X_dev=None, y_dev=None):
        sentences = check_sentences(X)
        poses = check_poses(y)
        check_consistent_length(sentences, poses)
        if len(sentences) < 2:
            raise ValueError("need at least 2 training samples")
        if self.embedding_space not in ("pose", "latent"):
            raise ValueError(f"embedding_space must be 'pose' or 'latent', got {self.embedding_space!r}")
        weights = LossWeights(lambda_a=self.lambda_a, lambda_b=self.lambda_b)
        if X_dev is None:
            dev_x, dev_y = sentences, poses
        else:
            dev_x, dev_y = check_sentences(X_dev, "X_dev"), check_poses(y_dev, "y_dev")
            check_consistent_length(dev_x, dev_y)

        self.vocab_ = Vocabulary.build(sentences, WORD_RESERVED)
        self._fit_scaler(poses)
        poses = [self._to_model(p) for p in poses]
        self.max_frames_ = self.max_frames or int(1.5 * max(len(p) for p in poses)) + 1
        self.model_ = Text2PoseModel(self._model_config(), len(self.vocab_), seed=self.random_state)
        src = [self.vocab_.encode(s) for s in sentences]
        embed = self._embedding_fn()

        def train_step(idx, rng):
            tokens, tok_pad = pad_tokens([src[i] for i in idx], self.vocab_.pad_id)
            truth, frame_pad = pad_frames([poses[i] for i in idx])
            inputs, _ = pad_frames([shift_frames(poses[i]) for i in idx])
            if self.decoder_noise > 0:
                noise = rng.normal(0.0, self.decoder_noise, inputs.shape)
                noise[:, 0] = 0.0
                inputs = inputs + noise * (~frame_pad)[..., None]
            if self.scheduled_sampling > 0:
                inputs = self._sample_inputs(tokens, inputs, tok_pad, frame_pad, rng)
            out = self.model_(tokens, Tensor(inputs), tok_pad, frame_pad)
            valid = ~frame_pad
            pred = out[:, :, :POSE_DIM]
            loss_a = mse_loss(pred, truth, valid)
            pairs = [(poses[i], pred[b, : len(poses[i])]) for b, i in enumerate(idx)]
            loss_b = metric_loss(select_triplets(pairs, rng, self.margin, self.mining, embed))
            eos_target = np.zeros(valid.shape)
            for b, i in enumerate(idx):
                eos_target[b, len(poses[i]) - 1] = 1.0
            loss_eos = binary_cross_entropy_with_logits(out[:, :, EOS_CHANNEL], eos_target, valid) * (
                1.0 / valid.sum()
            )
            total = weights.lambda_a * loss_a + weights.lambda_b * loss_b + self.lambda_eos * loss_eos
            raw_mse = float(
                np.sum(((pred.data - truth) * self.pose_scale_) ** 2 * valid[..., None]) / (valid.sum() * POSE_DIM)
            )
            return total, {"L_a": _float(loss_a), "L_b": _float(loss_b), "L_eos": _float(loss_eos),
                           "train_mse": raw_mse}

        def evaluate():
            return self._mean_dtw(self._generate(dev_x), dev_y)

        self._begin_fit()
        try:
            self._epoch_loop(train_step, evaluate, len(src))
        finally:
            self._end_fit()
        return self

    def _sample_inputs(self, tokens, inputs, tok_pad, frame_pad, rng):
        """Parallel scheduled sampling: replace a random subset of decoder
        inputs with the model's own one-step-ahead predictions, so training
        sees the kind of frames free-running generation feeds back."""
        with no_grad():
            out = self.model_(tokens, Tensor(inputs), tok_pad, frame_pad).data[:, :, :POSE_DIM]
        swap = rng.random(inputs.shape[:2]) < self.scheduled_sampling
        swap[:, 0] = False
        mixed = inputs.copy()
        mixed[:, 1:][swap[:, 1:]] = out[:, :-1][swap[:, 1:]]
        return mixed

    def _embedding_fn(self):
        # unit-variance inputs: dividing by sqrt(dim) makes squared distances
        # per-coordinate means, commensurate with the MSE term
        if self.embedding_space == "latent":
            scale = 1.0 / np.sqrt(self.embed_dim)
            return lambda v: self.model_.embed_frames(v) * scale
        scale = 1.0 / np.sqrt(POSE_DIM)
        return lambda v: v * scale

    @staticmethod
    def _mean_dtw(preds, truths) -> float:
        return float(np.mean([dtw(p, t).normalized_cost for p, t in zip(preds, truths)]))

    def _generate(self, sentences: list[list[str]], chunk: int = 64) -> list[np.ndarray]:
        out = []
        for start in range(0, len(sentences), chunk):
            part = sentences[start : start + chunk]
            ids = [self.vocab_.encode(s, strict=False) for s in part]
            tokens, pad = pad_tokens(ids, self.vocab_.pad_id)
            was = self.model_.training
            self.model_.eval()
            with no_grad():
                memory = self.model_.encode(tokens, pad)
            self.model_.train(was)
            seqs = decode_pose_autoregressive(self.model_, memory, self.max_frames_, pad)
            out.extend(self._from_model(q) for q in seqs)
        return out

    # --------------------------------------------------------------- predict
    def predict(self, X) -> list[np.ndarray]:
        """Generated ``(T, 150)`` pose sequences; unknown tokens map to UNK."""
        check_is_fitted(self, "model_")
        sentences = check_sentences(X)
        unknown = sorted({t for s in sentences for t in self.vocab_.unknown(s)})
        if unknown:
            logger.warning("out-of-vocabulary tokens replaced by %s: %s", "<unk>", " ".join(unknown))
        return self._generate(sentences)

    def score(self, X, y) -> float:
        """Negative mean length-normalised DTW cost (higher is better)."""
        return -self._mean_dtw(self.predict(X), check_poses(y))

    # ----------------------------------------------------------- persistence
    def _vocabularies(self):
        return {"source": self.vocab_.itos}

    def _extra_meta(self):
        return {"max_frames": int(self.max_frames_), **self._scaler_meta()}

    def _restore(self, ckpt):
        self.vocab_ = Vocabulary.from_list(ckpt["vocabularies"]["source"]["tokens"], len(WORD_RESERVED))
        self.max_frames_ = ckpt["meta"]["max_frames"]
        self._restore_scaler(ckpt["meta"])
        self.model_ = Text2PoseModel(self._model_config(), len(self.vocab_), seed=self.random_state)


class SignNetPose2Text(_SignNetEstimator):
    """Pose sequence -> sentence evaluation model.

    ``fit(X, y, glosses=...)`` takes ``(T, 150)`` pose arrays, target sentences
    and the per-sample gloss sequences for the CTC recognition head. Training
    minimises ``lambda_c * recognition + lambda_d * translation`` and keeps the
    epoch with the lowest dev loss.
    """

    _kind = "pose2text"
    _selection = "loss"

    def __init__(
        self,
        embed_dim=128,
        n_heads=4,
        n_encoder_layers=7,
        n_decoder_layers=2,
        ff_dim=None,
        dropout=0.1,
        max_seq_len=512,
        lambda_c=100.0,
        lambda_d=100.0,
        loss_form="log",
        lr=1e-3,
        batch_size=8,
        max_epochs=100,
        eval_every=1,
        early_stopping=None,
        scheduler_factor=0.5,
        scheduler_patience=5,
        min_lr=1e-6,
        max_words=None,
        input_noise=0.0,
        random_state=0,
        verbose=0,
        log_path=None,
    ):
        self.embed_dim = embed_dim
        self.n_heads = n_heads
        self.n_encoder_layers = n_encoder_layers
        self.n_decoder_layers = n_decoder_layers
        self.ff_dim = ff_dim
        self.dropout = dropout
        self.max_seq_len = max_seq_len
        self.lambda_c = lambda_c
        self.lambda_d = lambda_d
        self.loss_form = loss_form
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.eval_every = eval_every
        self.early_stopping = early_stopping
        self.scheduler_factor = scheduler_factor
        self.scheduler_patience = scheduler_patience
        self.min_lr = min_lr
        self.max_words = max_words
        self.input_noise = input_noise
        self.random_state = random_state
        self.verbose = verbose
        self.log_path = log_path

    def _batch_losses(self, idx, poses, glosses, words, rng=None):
        frames, frame_pad = pad_frames([poses[i] for i in idx])
        if rng is not None and self.input_noise > 0:
            frames = frames + rng.normal(0.0, self.input_noise, frames.shape) * (~frame_pad)[..., None]
        memory = self.model_.encode(Tensor(frames), frame_pad)
        gp = self.model_.gloss_probs(memory)
        bos, eos = self.words_.bos_id, self.words_.eos_id
        words_in, word_pad = pad_tokens([[bos] + words[i] for i in idx], self.words_.pad_id)
        z = self.model_.word_probs(memory, words_in, frame_pad, word_pad)
        loss_c = loss_d = None
        for b, i in enumerate(idx):
            lc = recognition_loss(gp[b, : len(poses[i])], glosses[i], self.loss_form, self.glosses_.blank_id)
            ld = translation_loss(z[b, : len(words[i]) + 1], words[i] + [eos], self.loss_form)
            loss_c = lc if loss_c is None else loss_c + lc
            loss_d = ld if loss_d is None else loss_d + ld
        n = 1.0 / len(idx)
        return loss_c * n, loss_d * n

    def fit(self, X, y, glosses=None, X_dev=None, y_dev=None, glosses_dev=None):
        poses = check_poses(X, "X")
        sentences = check_sentences(y, "y")
        if glosses is None:
            raise ValueError("glosses are required to train the recognition head")
        gloss_seqs = check_sentences(glosses, "glosses")
        check_consistent_length(poses, sentences, gloss_seqs)
        if len(poses) < 2:
            raise ValueError("need at least 2 training samples")
        weights = LossWeights(lambda_c=self.lambda_c, lambda_d=self.lambda_d)

        self._fit_scaler(poses)
        poses = [self._to_model(p) for p in poses]
        self.words_ = Vocabulary.build(sentences, WORD_RESERVED)
        self.glosses_ = Vocabulary.build(gloss_seqs, GLOSS_RESERVED)
        self.max_words_ = self.max_words or max(len(s) for s in sentences) + 2
        self.model_ = Pose2TextModel(self._model_config(), len(self.glosses_), len(self.words_),
                                     seed=self.random_state)
        words = [self.words_.encode(s) for s in sentences]
        glosses_ids = [self.glosses_.encode(g) for g in gloss_seqs]
        if X_dev is None:
            dev = (poses, glosses_ids, words)
        else:
            dev_poses = [self._to_model(p) for p in check_poses(X_dev, "X_dev")]
            dev_words = [self.words_.encode(s, strict=False) for s in check_sentences(y_dev, "y_dev")]
            dev_gloss = [self.glosses_.encode(g) for g in check_sentences(glosses_dev, "glosses_dev")]
            dev = (dev_poses, dev_gloss, dev_words)

        def train_step(idx, rng):
            loss_c, loss_d = self._batch_losses(idx, poses, glosses_ids, words, rng)
            total = weights.lambda_c * loss_c + weights.lambda_d * loss_d
            return total, {"L_c": _float(loss_c), "L_d": _float(loss_d)}

        def evaluate():
            self.model_.eval()
            dp, dg, dw = dev
            total = 0.0
            with no_grad():
                for start in range(0, len(dp), 32):
                    idx = list(range(start, min(start + 32, len(dp))))
                    lc, ld = self._batch_losses(idx, dp, dg, dw)
                    total += len(idx) * (weights.lambda_c * _float(lc) + weights.lambda_d * _float(ld))
            return total / len(dp)

        self._begin_fit()
        try:
            self._epoch_loop(train_step, evaluate, len(poses))
        finally:
            self._end_fit()
        return self

    def _encode_batch(self, poses):
        frames, pad = pad_frames([self._to_model(p) for p in poses])
        self.model_.eval()
        with no_grad():
            return self.model_.encode(Tensor(frames), pad), pad

    def predict_tokens(self, X) -> list[list[str]]:
        check_is_fitted(self, "model_")
        poses = check_poses(X, "X")
        out = []
        for start in range(0, len(poses), 64):
            memory, pad = self._encode_batch(poses[start : start + 64])
            ids = decode_text_autoregressive(
                self.model_, memory, self.max_words_, self.words_.bos_id, self.words_.eos_id, pad
            )
            out.extend(self.words_.decode(s) for s in ids)
        return out

    def predict(self, X) -> list[str]:
        """Greedy back-translation of each pose sequence to a sentence."""
        return [" ".join(t) for t in self.predict_tokens(X)]

    def predict_gloss(self, X) -> list[list[str]]:
        """Best-path CTC decoding of the gloss head (argmax, merge repeats, drop blanks)."""
        check_is_fitted(self, "model_")
        poses = check_poses(X, "X")
        out = []
        for p in poses:
            memory, _ = self._encode_batch([p])
            best = self.model_.gloss_probs(memory).data[0].argmax(axis=-1)
            ids = [int(g) for k, g in enumerate(best) if (k == 0 or g != best[k - 1]) and g != self.glosses_.blank_id]
            out.append(self.glosses_.decode(ids))
        return out

    def score(self, X, y) -> float:
        """Corpus BLEU-4 of the back-translations against ``y``."""
        return corpus_bleu(self.predict(X), list(y)).bleu[3]

    def _vocabularies(self):
        return {"words": self.words_.itos, "glosses": self.glosses_.itos}

    def _extra_meta(self):
        return {"max_words": int(self.max_words_), **self._scaler_meta()}

    def _restore(self, ckpt):
        voc = ckpt["vocabularies"]
        self.words_ = Vocabulary.from_list(voc["words"]["tokens"], len(WORD_RESERVED))
        self.glosses_ = Vocabulary.from_list(voc["glosses"]["tokens"], len(GLOSS_RESERVED))
        self.max_words_ = ckpt["meta"]["max_words"]
        self._restore_scaler(ckpt["meta"])
        self.model_ = Pose2TextModel(self._model_config(), len(self.glosses_), len(self.words_),
                                     seed=self.random_state)
