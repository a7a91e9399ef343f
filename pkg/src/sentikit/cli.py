"""Command-line entry point: ``sentikit <command> [flags]``.

Exit codes: 0 success, 1 data or configuration error, 2 usage error.
Machine-readable output goes to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import statistics
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .checkpoint import CheckpointError, load_checkpoint, read_metadata, save_checkpoint
from .corpus import LABEL_NAMES, CorpusError, RawReview, clean_corpus, load_corpus, split_corpus
from .textproc import EmbeddingFileError, VocabularyError, build_vocabulary, encode, encode_docs, make_batches
from .trainer import (
    ABLATION_AXES,
    EVAL_BATCH,
    ConfigError,
    TrainConfig,
    TrainingDiverged,
    evaluate,
    fit,
    load_config_file,
    predict_proba,
    run_ablation,
    write_text,
)

log = logging.getLogger("sentikit")

DATA_ERRORS = (
    ConfigError,
    CorpusError,
    CheckpointError,
    VocabularyError,
    EmbeddingFileError,
    TrainingDiverged,
    FileExistsError,
    OSError,
    ValueError,
)


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _int_tuple(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("training configuration (override --config)")
    for f in dataclasses.fields(TrainConfig):
        kind = f.type if isinstance(f.type, str) else getattr(f.type, "__name__", str(f.type))
        if kind == "bool":
            group.add_argument(_flag(f.name), dest=f.name, action=argparse.BooleanOptionalAction, default=None)
        elif kind == "int":
            group.add_argument(_flag(f.name), dest=f.name, type=int, default=None, metavar="N")
        elif kind == "float":
            group.add_argument(_flag(f.name), dest=f.name, type=float, default=None, metavar="X")
        elif kind.startswith("tuple"):
            group.add_argument(_flag(f.name), dest=f.name, type=_int_tuple, default=None, metavar="A,B,C")
        else:
            group.add_argument(_flag(f.name), dest=f.name, default=None)


def effective_config(args: argparse.Namespace) -> TrainConfig:
    """Defaults, then the config file, then explicit flags."""
    values: dict[str, Any] = {}
    if getattr(args, "config", None):
        values.update(load_config_file(args.config))
    for f in dataclasses.fields(TrainConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    try:
        cfg = TrainConfig.from_dict(values)
    except TypeError as exc:
        raise ConfigError("config", str(exc)) from exc
    return cfg.validate()


def _read_split(path: str, cfg: TrainConfig):
    return split_corpus(clean_corpus(load_corpus(path), cfg.clean_config))


# ---------------------------------------------------------------------------
# commands


def cmd_prepare(args) -> int:
    cfg = effective_config(args)
    split = _read_split(args.data, cfg)
    vocab = build_vocabulary(split.train, cfg.vocab_size)
    print(f"vocabulary\t{len(vocab)}")
    for name in ("train", "valid", "test"):
        docs = getattr(split, name)
        tokens = [len(d.tokens) for d in docs]
        encoded = [len(encode(d.tokens, vocab)) for d in docs]
        positives = sum(d.label for d in docs)
        print(
            f"{name}\tdocs={len(docs)}\tpositive={positives}\t"
            f"tokens_min={min(tokens)}\ttokens_max={max(tokens)}\ttokens_mean={statistics.fmean(tokens):.1f}\t"
            f"encoded_min={min(encoded)}\tencoded_max={max(encoded)}\t"
            f"truncated={sum(n > cfg.max_len for n in encoded)}"
        )
    return 0


def cmd_train(args) -> int:
    cfg = effective_config(args)
    out = Path(args.out)
    if out.exists() and not args.force:
        raise FileExistsError(f"{out} exists; pass --force to overwrite")
    split = _read_split(args.data, cfg)
    model, report = fit(cfg, split)
    save_checkpoint(model, report.vocab, cfg, out, force=args.force)
    prefix = Path(args.report) if args.report else out.with_suffix("")
    csv_path = prefix.with_name(prefix.name + ".report.csv")
    json_path = prefix.with_name(prefix.name + ".report.json")
    write_text(csv_path, report.to_csv())
    write_text(json_path, report.to_json())
    t = report.test
    print(f"checkpoint\t{out}")
    print(f"report\t{csv_path}")
    print(f"test_loss\t{t.loss:.6f}\ntest_accuracy\t{t.accuracy:.6f}\ntest_count\t{t.count}")
    return 0


def cmd_evaluate(args) -> int:
    model, vocab, cfg = load_checkpoint(args.model)
    docs = clean_corpus(load_corpus(args.data), cfg.clean_config)
    metrics = evaluate(model, make_batches(encode_docs(docs, vocab, cfg.max_len), EVAL_BATCH))
    print(json.dumps(dataclasses.asdict(metrics)))
    return 0


def cmd_predict(args) -> int:
    model, vocab, cfg = load_checkpoint(args.model)
    lines = args.text if args.text else [line.rstrip("\r\n") for line in sys.stdin]
    if not lines:
        return 0
    # labels are placeholders; only the encoded ids are used
    docs = clean_corpus([RawReview(text, "negative") for text in lines], cfg.clean_config)
    ids = np.array([s.ids for s in encode_docs(docs, vocab, cfg.max_len)], dtype=np.int64)
    for p in predict_proba(model, ids):
        label = LABEL_NAMES[int(p >= 0.5)]
        # keep the printed value strictly inside (0, 1) at 4 decimals
        print(f"{label}\t{min(max(float(p), 1e-4), 1 - 1e-4):.4f}")
    return 0


def _parse_axis(spec: str) -> tuple[str, list]:
    name, sep, values = spec.partition("=")
    name = name.strip().replace("-", "_")
    if not sep or not values:
        raise ConfigError("axis", f"expected NAME=V1,V2,..., got {spec!r}")
    if name not in ABLATION_AXES:
        raise ConfigError("axis", f"{name!r} is not one of {ABLATION_AXES}")
    cast = {"activation": str, "learning_rate": float, "batch_size": int}[name]
    try:
        return name, [cast(v.strip()) for v in values.split(",")]
    except ValueError as exc:
        raise ConfigError("axis", f"bad value in {spec!r}: {exc}") from exc


def cmd_ablate(args) -> int:
    cfg = effective_config(args)
    grid: dict[str, list] = {}
    if args.grid:
        data = load_config_file(args.grid)
        grid.update({k: list(v) for k, v in data.items()})
    for spec in args.axis or []:
        name, values = _parse_axis(spec)
        grid[name] = values
    if not grid:
        raise ConfigError("axis", "no ablation axes given (use --axis or --grid)")
    split = _read_split(args.data, cfg)
    report = run_ablation(cfg, grid, split, workers=args.workers, per_point_seeds=args.per_point_seeds)
    prefix = Path(args.out)
    write_text(prefix.with_name(prefix.name + ".csv"), report.to_csv())
    write_text(prefix.with_name(prefix.name + ".json"), report.to_json())
    sys.stdout.write(report.to_csv())
    return 0


def cmd_inspect(args) -> int:
    meta = read_metadata(args.model)
    vocab = meta.pop("vocab")
    meta["vocab_size"] = len(vocab)
    meta["vocab_head"] = vocab[:20]
    print(json.dumps(meta, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sentikit", description="Movie-review sentiment classifiers.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log per-epoch progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("prepare", help="validate a CSV and print fold sizes and length statistics")
    p.add_argument("--data", required=True)
    p.add_argument("--config")
    add_config_flags(p)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train a model and write a checkpoint and report")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--config", help="JSON file of training config fields")
    p.add_argument("--report", help="report path prefix (default: checkpoint path without suffix)")
    p.add_argument("--force", action="store_true", help="overwrite an existing checkpoint")
    add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a labeled CSV with a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify --text values or stdin lines")
    p.add_argument("--model", required=True)
    p.add_argument("--text", action="append", help="review text (repeatable); default reads stdin")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("ablate", help="run a hyperparameter grid")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="report path prefix")
    p.add_argument("--config")
    p.add_argument("--grid", help="JSON object mapping axis name to a list of values")
    p.add_argument("--axis", action="append", metavar="NAME=V1,V2", help="grid axis (repeatable)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--per-point-seeds", action="store_true")
    add_config_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("inspect", help="print checkpoint metadata")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_inspect)
    return parser


def run_cli(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s", stream=sys.stderr
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        flag = _flag(exc.field) if exc.field in {f.name for f in dataclasses.fields(TrainConfig)} else exc.field
        print(f"sentikit: error: {flag}: {str(exc).split(': ', 1)[-1]}", file=sys.stderr)
        return 1
    except DATA_ERRORS as exc:
        print(f"sentikit: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli())
