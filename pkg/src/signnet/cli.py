"""``signnet`` command line.

Every command takes long-form ``--key value`` flags. ``--config FILE`` loads a
JSON object whose keys are flag names (dashes or underscores); flags given
on the command line win over the file. Failures print one JSON line to
stderr and exit with 1 (usage), 2 (data) or 3 (training divergence).
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data.corpus import ManifestError, read_manifest, write_manifest
from .data.poses import PoseFormatError, load_pose, save_pose
from .data.synthetic import SyntheticSpec, generate_synthetic_corpus
from .estimators import SignNetPose2Text, SignNetText2Pose, TrainingDivergence
from .losses import LossWeights
from .nn.checkpoint import CheckpointError
from .render import render_svg
from .train import DEFAULT_GRID, TrainConfig, backtranslate, grid_search, train_pose2text, train_text2pose

logger = logging.getLogger("signnet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIVERGED = 0, 1, 2, 3
POSE_SUFFIXES = (".pose", ".psb")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ------------------------------------------------------------------ helpers
def _read_lines(path) -> list[tuple[str, str]]:
    """``id<TAB>text`` lines, or bare text lines numbered from 1."""
    rows = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for n, line in enumerate(lines, 1):
        if "\t" in line:
            sid, text = line.split("\t", 1)
        else:
            sid, text = f"line{n:05d}", line
        if not text.strip():
            raise DataError(f"{path}: line {n} is empty")
        rows.append((sid.strip(), text.strip()))
    if not rows:
        raise DataError(f"{path}: no input lines")
    ids = [r[0] for r in rows]
    if len(set(ids)) != len(ids):
        raise DataError(f"{path}: duplicate ids")
    return rows


def _pose_files(pose_dir) -> dict[str, Path]:
    pose_dir = Path(pose_dir)
    if not pose_dir.is_dir():
        raise DataError(f"{pose_dir}: not a directory")
    files = {p.stem: p for p in sorted(pose_dir.iterdir()) if p.suffix in POSE_SUFFIXES}
    if not files:
        raise DataError(f"{pose_dir}: no pose files")
    return files


def _references(args) -> dict[str, str]:
    if args.manifest:
        return {s.id: s.text for s in read_manifest(args.manifest)}
    if args.references:
        return dict(_read_lines(args.references))
    raise UsageError("one of --references or --manifest is required")


def _train_config(args, kind: str) -> TrainConfig:
    model = {}
    for key in ("embed_dim", "n_heads", "n_encoder_layers", "n_decoder_layers", "ff_dim", "dropout",
                "max_seq_len", "decoder_noise", "input_noise", "loss_form", "mining", "embedding_space",
                "margin", "lambda_eos", "scheduled_sampling"):
        value = getattr(args, key, None)
        if value is not None:
            model[key] = value
    if kind == "text2pose":
        weights = LossWeights(lambda_a=args.lambda_a, lambda_b=args.lambda_b)
    else:
        weights = LossWeights(lambda_c=args.lambda_c, lambda_d=args.lambda_d)
    return TrainConfig(weights=weights, batch_size=args.batch_size, max_epochs=args.max_epochs,
                       eval_every=args.eval_every, early_stopping=args.early_stopping, lr=args.lr,
                       seed=args.seed, model=model)


# ----------------------------------------------------------------- commands
def cmd_gen_corpus(args) -> str:
    spec = SyntheticSpec.with_confusable(args.confusable_pairs, vocab_size=args.vocab_size,
                                         noise_std=args.noise_std, seed=args.seed)
    samples = generate_synthetic_corpus(spec, args.n_samples)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = write_manifest(out / "manifest.tsv", samples, binary=args.binary)
    (out / "spec.json").write_text(spec.to_json() + "\n", encoding="utf-8")
    return f"wrote {len(samples)} samples to {manifest}"


def _train(args, kind):
    corpus = read_manifest(args.manifest)
    dev = read_manifest(args.dev_manifest) if args.dev_manifest else None
    config = _train_config(args, kind)
    if kind == "text2pose":
        result = train_text2pose(corpus, config, args.source, dev, log_path=args.log)
    else:
        result = train_pose2text(corpus, config, dev, log_path=args.log)
    Path(args.out).write_bytes(result.checkpoint)
    est = result.estimator
    return (f"saved {kind} checkpoint to {args.out}; best epoch {est.best_epoch_} "
            f"{config.selection(kind)} {est.best_score_:.6f}")


def cmd_train_t2p(args) -> str:
    return _train(args, "text2pose")


def cmd_train_p2t(args) -> str:
    return _train(args, "pose2text")


def cmd_generate(args) -> str:
    rows = _read_lines(args.input)
    model = SignNetText2Pose.load(args.model)
    poses = model.predict([text for _, text in rows])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    suffix = ".psb" if args.binary else ".pose"
    for (sid, _), pose in zip(rows, poses):
        save_pose(out / f"{sid}{suffix}", pose)
    return f"wrote {len(rows)} pose files to {out}"


def cmd_backtranslate(args) -> str:
    files = _pose_files(args.poses)
    model = SignNetPose2Text.load(args.model)
    references = _references(args)
    truths = None
    if args.manifest:
        truths = {s.id: s.pose for s in read_manifest(args.manifest)}
        missing = sorted(set(files) - set(truths))
        if missing:
            raise DataError(f"no ground truth for ids: {', '.join(missing[:5])}")
    poses = {sid: load_pose(p) for sid, p in files.items()}
    params = model.get_params()
    echo = {k: params[k] for k in ("embed_dim", "n_heads", "n_encoder_layers", "n_decoder_layers",
                                   "lambda_c", "lambda_d", "random_state")}
    echo["model"] = str(args.model)
    report = backtranslate(poses, model, references, truths, echo)
    text = report.format()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return text.rstrip("\n")


def _parse_grid(text: str) -> list[tuple[float, float]]:
    try:
        cells = [tuple(float(v) for v in cell.split(",")) for cell in text.split(";") if cell.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --weights value {text!r}: {exc}") from None
    if not cells or any(len(c) != 2 for c in cells):
        raise UsageError(f"--weights wants 'a,b;a,b;...', got {text!r}")
    return cells


def cmd_grid(args) -> str:
    corpus = read_manifest(args.manifest)
    p2t = SignNetPose2Text.load(args.p2t)
    grid = _parse_grid(args.weights) if args.weights else list(DEFAULT_GRID)
    arms = [a.strip() for a in args.arms.split(",") if a.strip()]
    report = grid_search(corpus, p2t, grid, _train_config(args, "text2pose"), arms)
    text = report.format()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    return text.rstrip("\n")


def cmd_render(args) -> str:
    frames = load_pose(args.pose)
    paths = render_svg(frames, args.out, args.stride, stem=Path(args.pose).stem)
    return f"wrote {len(paths)} SVG files to {args.out}"


# ------------------------------------------------------------------- parser
def _model_flags(p, layers_default: str):
    g = p.add_argument_group("model")
    g.add_argument("--embed-dim", type=int)
    g.add_argument("--n-heads", type=int)
    g.add_argument("--n-encoder-layers", type=int, help=f"default {layers_default}")
    g.add_argument("--n-decoder-layers", type=int)
    g.add_argument("--ff-dim", type=int)
    g.add_argument("--dropout", type=float)
    g.add_argument("--max-seq-len", type=int)
    t = p.add_argument_group("training")
    t.add_argument("--batch-size", type=int, default=8)
    t.add_argument("--max-epochs", type=int, default=100)
    t.add_argument("--eval-every", type=int, default=1)
    t.add_argument("--early-stopping", type=int)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--log", help="per-epoch JSON-lines log")


def _t2p_flags(p):
    p.add_argument("--lambda-a", type=float, default=5.0)
    p.add_argument("--lambda-b", type=float, default=5.0)
    p.add_argument("--lambda-eos", type=float)
    p.add_argument("--margin", type=float)
    p.add_argument("--mining", choices=["random", "hardest"])
    p.add_argument("--embedding-space", choices=["pose", "latent"])
    p.add_argument("--decoder-noise", type=float)
    p.add_argument("--scheduled-sampling", type=float, help="fraction of decoder inputs replaced by predictions")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="signnet", description="Text/gloss to sign-pose generation and back-translation.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="JSON file of flag values")
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)
        return p

    p = command("gen-corpus", cmd_gen_corpus, "write a seeded synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--n-samples", type=int, default=50)
    p.add_argument("--vocab-size", type=int, default=12)
    p.add_argument("--confusable-pairs", type=int, default=0)
    p.add_argument("--noise-std", type=float, default=0.01)
    p.add_argument("--binary", action="store_true")

    p = command("train-t2p", cmd_train_t2p, "train a text- or gloss-to-pose model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dev-manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--source", choices=["text", "gloss"], default="text")
    _model_flags(p, "2")
    _t2p_flags(p)

    p = command("train-p2t", cmd_train_p2t, "train the pose-to-text evaluation model")
    p.add_argument("--manifest", required=True)
    p.add_argument("--dev-manifest")
    p.add_argument("--out", required=True)
    _model_flags(p, "7")
    p.add_argument("--lambda-c", type=float, default=100.0)
    p.add_argument("--lambda-d", type=float, default=100.0)
    p.add_argument("--loss-form", choices=["complement", "log"])
    p.add_argument("--input-noise", type=float)

    p = command("generate", cmd_generate, "generate one pose file per input line")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="text file, one sentence (or id<TAB>sentence) per line")
    p.add_argument("--out", required=True)
    p.add_argument("--binary", action="store_true")

    p = command("backtranslate", cmd_backtranslate, "translate pose files back to text and score BLEU")
    p.add_argument("--poses", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--references", help="id<TAB>sentence file")
    p.add_argument("--manifest", help="corpus manifest; supplies references and ground truth for DTW")
    p.add_argument("--out")

    p = command("grid", cmd_grid, "loss-weight grid with back-translation BLEU")
    p.add_argument("--manifest", required=True)
    p.add_argument("--p2t", required=True)
    p.add_argument("--weights", help="'a,b;a,b;...' (default: the five standard cells)")
    p.add_argument("--arms", default="G2P,T2P")
    p.add_argument("--out")
    _model_flags(p, "2")
    _t2p_flags(p)

    p = command("render", cmd_render, "render pose frames as SVG stick figures")
    p.add_argument("--pose", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--stride", type=int, default=1)
    return parser


def _subparser(parser, name):
    return parser._subparsers._group_actions[0].choices.get(name)


def _load_config(path) -> dict:
    try:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    if not isinstance(config, dict):
        raise UsageError("config file must hold a JSON object")
    return {k.replace("-", "_"): v for k, v in config.items()}


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    # find the command and any --config first, so the file can also supply
    # flags that are otherwise required
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("command", nargs="?")
    probe.add_argument("--config")
    head, _ = probe.parse_known_args([a for a in argv if a not in ("-v", "--verbose")])
    sub = _subparser(parser, head.command) if head.command else None
    if sub is not None and head.config:
        config = _load_config(head.config)
        known = {a.dest for a in sub._actions} - {"help", "config", "func"}
        unknown = sorted(set(config) - known)
        if unknown:
            raise UsageError(f"unknown config keys for {head.command}: {', '.join(unknown)}")
        for action in sub._actions:
            if action.dest in config:
                action.required = False
        # config values become defaults, so explicit flags still win
        sub.set_defaults(**config)
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a command is required")
    return args


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "code": code, "message": " ".join(str(message).split())}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        message = args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except TrainingDivergence as exc:
        return _fail(EXIT_DIVERGED, "divergence", exc)
    except (DataError, ManifestError, PoseFormatError, CheckpointError, OSError, KeyError, ValueError) as exc:
        return _fail(EXIT_DATA, "data", exc)
    if message:
        print(message)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
