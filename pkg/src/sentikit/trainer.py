"""Training loops, evaluation, reports and hyperparameter ablation grids."""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from .autodiff import Tape
from .corpus import CleanConfig, CorpusSplit
from .layers import ACTIVATIONS, CnnClassifier, LstmClassifier
from .optim import AdamState, Metrics, adam_step, bce_loss, binary_accuracy
from .textproc import Batch, Vocabulary, build_vocabulary, encode_docs, load_pretrained_embeddings, make_batches

log = logging.getLogger(__name__)

EVAL_BATCH = 256
ABLATION_AXES = ("activation", "learning_rate", "batch_size")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class TrainingDiverged(FloatingPointError):
    """Raised when a batch loss is not finite.

    ``last_good`` holds copies of the parameters as they were at the start
    of the failing epoch.
    """

    def __init__(self, message: str, last_good: dict[str, np.ndarray]):
        super().__init__(message)
        self.last_good = last_good


@dataclass(frozen=True)
class TrainConfig:
    model: str = "lstm"
    activation: str = "relu"
    learning_rate: float = 0.001
    batch_size: int = 32
    epochs: int = 5
    seed: int = 0
    max_len: int = 1000
    vocab_size: int = 1000
    embedding: str = "random"  # or a path to a word-vector text file
    embedding_dim: int = 64
    hidden_size: int = 128
    fc_size: int = 64
    dropout: float = 0.3
    kernel_size: int = 3
    filters: tuple[int, ...] = (128, 64, 32)
    pool_window: int = 2
    pool_stride: int = 2
    dense_size: int = 64
    shuffle: bool = True
    lowercase: bool = True
    strip_html_urls: bool = False
    stopwords: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(int(f) for f in self.filters))

    def validate(self) -> "TrainConfig":
        if self.model not in ("lstm", "cnn"):
            raise ConfigError("model", f"must be 'lstm' or 'cnn', got {self.model!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError("activation", f"must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not (self.learning_rate > 0 and np.isfinite(self.learning_rate)):
            raise ConfigError("learning_rate", f"must be > 0, got {self.learning_rate}")
        for name in ("batch_size", "epochs", "max_len", "vocab_size", "embedding_dim", "hidden_size",
                     "fc_size", "kernel_size", "pool_window", "pool_stride", "dense_size"):
            if getattr(self, name) < 1:
                raise ConfigError(name, f"must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout", f"must be in [0, 1), got {self.dropout}")
        if self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size", f"must be odd, got {self.kernel_size}")
        if not self.filters or min(self.filters) < 1:
            raise ConfigError("filters", f"must be positive counts, got {self.filters}")
        return self

    @property
    def clean_config(self) -> CleanConfig:
        return CleanConfig(strip_html_urls=self.strip_html_urls, lowercase=self.lowercase, stopword_path=self.stopwords)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["filters"] = list(self.filters)
        return d

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TrainConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config field")
        return cls(**data)


def build_model(cfg: TrainConfig, vocab_size: int, embedding_matrix: np.ndarray | None = None):
    common = dict(
        embedding_dim=cfg.embedding_dim,
        activation=cfg.activation,
        seed=cfg.seed,
        dtype=np.float32,
        embedding_matrix=embedding_matrix,
    )
    if cfg.model == "lstm":
        return LstmClassifier.init(
            vocab_size, hidden_size=cfg.hidden_size, fc_size=cfg.fc_size, dropout=cfg.dropout, **common
        )
    return CnnClassifier.init(
        vocab_size,
        cfg.max_len,
        filters=cfg.filters,
        kernel_size=cfg.kernel_size,
        pool_window=cfg.pool_window,
        pool_stride=cfg.pool_stride,
        dense_size=cfg.dense_size,
        **common,
    )


def snapshot(model) -> dict[str, np.ndarray]:
    return {name: t.data.copy() for name, t in model.parameters().items()}


def train_epoch(model, batches: Sequence[Batch], adam: AdamState, rng: np.random.Generator) -> Metrics:
    """One forward/backward/Adam step per batch, in order; dropout active."""
    params = model.parameters()
    last_good = snapshot(model)
    total_loss, correct, count = 0.0, 0.0, 0
    for n, batch in enumerate(batches):
        for t in params.values():
            t.zero_grad()
        tape = Tape()
        probs = model.forward(tape, batch.ids, "train", rng)
        loss = bce_loss(tape, probs, batch.labels)
        if not np.isfinite(loss.data):
            raise TrainingDiverged(f"non-finite loss at batch {n}", last_good)
        tape.backward(loss)
        adam_step(params, {k: t.grad for k, t in params.items()}, adam)
        b = len(batch)
        total_loss += float(loss.data) * b
        correct += binary_accuracy(probs, batch.labels) * b
        count += b
    return Metrics(total_loss / count, correct / count, count)


def predict_proba(model, ids: np.ndarray, batch_size: int = EVAL_BATCH) -> np.ndarray:
    ids = np.asarray(ids)
    out = []
    for i in range(0, len(ids), batch_size):
        out.append(model.forward(Tape(record=False), ids[i : i + batch_size], "eval").data.reshape(-1))
    return np.concatenate(out) if out else np.zeros(0)


def evaluate(model, batches: Sequence[Batch]) -> Metrics:
    """Loss and accuracy in eval mode; parameters are not touched."""
    total_loss, correct, count = 0.0, 0.0, 0
    for batch in batches:
        tape = Tape(record=False)
        probs = model.forward(tape, batch.ids, "eval")
        loss = bce_loss(tape, probs, batch.labels)
        b = len(batch)
        total_loss += float(loss.data) * b
        correct += binary_accuracy(probs, batch.labels) * b
        count += b
    if count == 0:
        return Metrics(0.0, 0.0, 0)
    return Metrics(total_loss / count, correct / count, count)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    valid_loss: float
    valid_accuracy: float
    seconds: float


REPORT_CSV_FIELDS = ("epoch", "train_loss", "train_accuracy", "valid_loss", "valid_accuracy")


@dataclass
class TrainReport:
    config: dict[str, Any]
    seed: int
    epochs: list[EpochRecord] = field(default_factory=list)
    test: Metrics | None = None
    vocab: Vocabulary | None = field(default=None, repr=False)

    def to_csv(self) -> str:
        # wall time stays out of the CSV so identical runs give identical files
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_CSV_FIELDS)
        for e in self.epochs:
            w.writerow([e.epoch, repr(e.train_loss), repr(e.train_accuracy), repr(e.valid_loss), repr(e.valid_accuracy)])
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {
            "config": self.config,
            "seed": self.seed,
            "epochs": [dataclasses.asdict(e) for e in self.epochs],
            "test": dataclasses.asdict(self.test) if self.test else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _epoch_seed(seed: int, epoch: int) -> int:
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def fit(
    cfg: TrainConfig,
    split: CorpusSplit,
    on_epoch: Callable[[EpochRecord], None] | None = None,
):
    """Train a classifier on ``split.train``; returns ``(model, report)``.

    The vocabulary is fitted on the training fold only and attached to the
    report. Validation is scored after every epoch and the test fold once
    at the end.
    """
    cfg.validate()
    if not (split.train and split.valid and split.test):
        raise ValueError(f"every fold must be non-empty, got sizes {split.sizes()}")
    with threadpool_limits(limits=1):
        vocab = build_vocabulary(split.train, cfg.vocab_size)
        train = encode_docs(split.train, vocab, cfg.max_len)
        valid = make_batches(encode_docs(split.valid, vocab, cfg.max_len), EVAL_BATCH)
        test = make_batches(encode_docs(split.test, vocab, cfg.max_len), EVAL_BATCH)

        matrix = None
        if cfg.embedding != "random":
            init = load_pretrained_embeddings(cfg.embedding, vocab, cfg.embedding_dim, seed=cfg.seed)
            log.info("pretrained vectors cover %.1f%% of the vocabulary", 100 * init.coverage)
            matrix = init.matrix
        model = build_model(cfg, len(vocab), matrix)
        adam = AdamState(lr=cfg.learning_rate)
        rng = np.random.default_rng([cfg.seed, 1])

        report = TrainReport(cfg.to_dict(), cfg.seed, vocab=vocab)
        for epoch in range(1, cfg.epochs + 1):
            start = time.perf_counter()
            batches = make_batches(train, cfg.batch_size, seed=_epoch_seed(cfg.seed, epoch), shuffle=cfg.shuffle)
            tr = train_epoch(model, batches, adam, rng)
            va = evaluate(model, valid)
            rec = EpochRecord(epoch, tr.loss, tr.accuracy, va.loss, va.accuracy, time.perf_counter() - start)
            report.epochs.append(rec)
            log.info(
                "epoch %d: train loss %.4f acc %.4f | valid loss %.4f acc %.4f (%.1fs)",
                epoch, tr.loss, tr.accuracy, va.loss, va.accuracy, rec.seconds,
            )
            if on_epoch is not None:
                on_epoch(rec)
        report.test = evaluate(model, test)
    return model, report


# ---------------------------------------------------------------------------
# ablation


@dataclass
class AblationRow:
    index: int
    delta: dict[str, Any]
    valid_accuracy: float
    valid_loss: float
    epochs: int
    seed: int


@dataclass
class AblationReport:
    axes: list[str]
    rows: list[AblationRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", *self.axes, "valid_accuracy", "valid_loss", "epochs", "seed"])
        for r in self.rows:
            w.writerow([r.index, *(r.delta[a] for a in self.axes), repr(r.valid_accuracy), repr(r.valid_loss),
                        r.epochs, r.seed])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"axes": self.axes, "rows": [dataclasses.asdict(r) for r in self.rows]}, indent=2)

    def best(self, metric: str = "valid_accuracy") -> AblationRow:
        return max(self.rows, key=lambda r: getattr(r, metric))


def _run_point(args) -> AblationRow:
    index, cfg, delta, split = args
    _, report = fit(cfg, split)
    last = report.epochs[-1]
    return AblationRow(index, delta, last.valid_accuracy, last.valid_loss, len(report.epochs), cfg.seed)


def ablation_points(base: TrainConfig, grid: Mapping[str, Sequence], per_point_seeds: bool = False):
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("ablation grid must have at least one non-empty axis")
    bad = [a for a in grid if a not in ABLATION_AXES]
    if bad:
        raise ConfigError(bad[0], f"not an ablation axis; choose from {ABLATION_AXES}")
    axes = list(grid)
    points = []
    for index, values in enumerate(itertools.product(*(grid[a] for a in axes))):
        delta = dict(zip(axes, values))
        seed = base.seed + index if per_point_seeds else base.seed
        cfg = dataclasses.replace(base, seed=seed, **delta).validate()
        points.append((index, cfg, delta))
    return axes, points


def run_ablation(
    base: TrainConfig,
    grid: Mapping[str, Sequence],
    split: CorpusSplit,
    workers: int = 1,
    per_point_seeds: bool = False,
) -> AblationReport:
    """Train every point of the Cartesian product of ``grid`` axes.

    All points share ``base.seed`` unless ``per_point_seeds`` is set. Rows
    come back in grid order whatever the worker scheduling.
    """
    axes, points = ablation_points(base, grid, per_point_seeds)
    jobs = [(i, cfg, delta, split) for i, cfg, delta in points]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    else:
        rows = [_run_point(job) for job in jobs]
    return AblationReport(axes, sorted(rows, key=lambda r: r.index))


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def load_config_file(path: str | Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} must hold a JSON object")
    return data


__all__ = [
    "AblationReport",
    "AblationRow",
    "ConfigError",
    "EpochRecord",
    "TrainConfig",
    "TrainReport",
    "TrainingDiverged",
    "build_model",
    "evaluate",
    "fit",
    "predict_proba",
    "run_ablation",
    "train_epoch",
]
