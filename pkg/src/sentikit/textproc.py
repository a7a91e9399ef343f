"""Vocabulary, fixed-length encoding, batching and pretrained vectors."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .corpus import CleanedDoc

PAD_ID = 0


class VocabularyError(ValueError):
    pass


class EmbeddingFileError(ValueError):
    pass


class Vocabulary:
    """Immutable token -> id map; ids run 1..len(vocab), 0 is padding."""

    pad_id = PAD_ID

    def __init__(self, tokens: Sequence[str], max_size: int | None = None):
        tokens = list(tokens)
        if len(set(tokens)) != len(tokens):
            raise VocabularyError("duplicate tokens in vocabulary")
        self.max_size = max_size if max_size is not None else len(tokens)
        if len(tokens) > self.max_size:
            raise VocabularyError(f"{len(tokens)} tokens exceed max_size {self.max_size}")
        self._tokens = tuple(tokens)
        self.token_to_id: Mapping[str, int] = MappingProxyType({t: i for i, t in enumerate(tokens, start=1)})

    @property
    def tokens(self) -> tuple[str, ...]:
        """Tokens in id order (token for id ``k`` is ``tokens[k - 1]``)."""
        return self._tokens

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def __getitem__(self, token: str) -> int:
        return self.token_to_id[token]

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens and self.max_size == other.max_size

    def __repr__(self) -> str:
        return f"Vocabulary(size={len(self)}, max_size={self.max_size})"


def build_vocabulary(train_docs: Sequence[CleanedDoc], max_size: int = 1000) -> Vocabulary:
    """Rank tokens by descending count, ties alphabetical, keep the top ``max_size``."""
    if max_size < 1:
        raise VocabularyError(f"max_size must be >= 1, got {max_size}")
    counts = Counter(tok for doc in train_docs for tok in doc.tokens)
    if not counts:
        raise VocabularyError("cannot build a vocabulary from an empty training corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary([tok for tok, _ in ranked[:max_size]], max_size=max_size)


def encode(tokens: Sequence[str], vocab: Vocabulary) -> list[int]:
    # out-of-vocabulary tokens are dropped, there is no UNK id
    lookup = vocab.token_to_id
    return [lookup[t] for t in tokens if t in lookup]


def pad_truncate(ids: Sequence[int], length: int) -> list[int]:
    if length < 1:
        raise ValueError(f"sequence length must be >= 1, got {length}")
    ids = list(ids[:length])
    return ids + [PAD_ID] * (length - len(ids))


@dataclass(frozen=True)
class EncodedSeq:
    ids: tuple[int, ...]
    label: int


@dataclass(frozen=True)
class Batch:
    ids: np.ndarray  # (B, T) int64
    labels: np.ndarray  # (B,) int64

    def __len__(self) -> int:
        return self.ids.shape[0]


def encode_docs(docs: Sequence[CleanedDoc], vocab: Vocabulary, length: int) -> list[EncodedSeq]:
    return [EncodedSeq(tuple(pad_truncate(encode(d.tokens, vocab), length)), d.label) for d in docs]


def make_batches(seqs: Sequence[EncodedSeq], batch_size: int, seed: int = 0, shuffle: bool = False) -> list[Batch]:
    """Partition ``seqs`` into batches; all but possibly the last have ``batch_size`` rows."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    if not seqs:
        raise ValueError("cannot batch an empty sequence list")
    lengths = {len(s.ids) for s in seqs}
    if len(lengths) != 1:
        raise ValueError(f"sequences have differing lengths {sorted(lengths)}")
    ids = np.array([s.ids for s in seqs], dtype=np.int64)
    labels = np.array([s.label for s in seqs], dtype=np.int64)
    order = np.random.default_rng(seed).permutation(len(seqs)) if shuffle else np.arange(len(seqs))
    return [
        Batch(ids[order[i : i + batch_size]], labels[order[i : i + batch_size]])
        for i in range(0, len(seqs), batch_size)
    ]


@dataclass(frozen=True)
class EmbeddingInit:
    matrix: np.ndarray  # (len(vocab) + 1, dim), row 0 zero
    source: str  # "random" or "pretrained"
    dim: int
    coverage: float = 0.0


def random_embeddings(vocab_size: int, dim: int, rng: np.random.Generator, dtype=np.float64) -> np.ndarray:
    mat = rng.uniform(-0.05, 0.05, size=(vocab_size + 1, dim)).astype(dtype)
    mat[PAD_ID] = 0.0
    return mat


def load_pretrained_embeddings(path: str | Path, vocab: Vocabulary, dim: int, seed: int = 0) -> EmbeddingInit:
    """Read ``word v1 ... vd`` lines (GloVe text format) into an embedding matrix.

    Words missing from the file keep a seeded uniform draw in [-0.05, 0.05].
    """
    path = Path(path)
    mat = random_embeddings(len(vocab), dim, np.random.default_rng(seed))
    found = set()
    try:
        fh = path.open(encoding="utf-8")
    except OSError as exc:
        raise EmbeddingFileError(f"cannot read embedding file {path}: {exc}") from exc
    with fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if not parts or parts == [""]:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != dim:
                raise EmbeddingFileError(f"{path}:{line_no}: expected {dim} values for {word!r}, found {len(values)}")
            idx = vocab.token_to_id.get(word)
            if idx is None:
                continue
            try:
                vec = np.array([float(v) for v in values])
            except ValueError as exc:
                raise EmbeddingFileError(f"{path}:{line_no}: {exc}") from exc
            if not np.all(np.isfinite(vec)):
                raise EmbeddingFileError(f"{path}:{line_no}: non-finite value for {word!r}")
            mat[idx] = vec
            found.add(word)
    mat[PAD_ID] = 0.0
    coverage = len(found) / len(vocab) if len(vocab) else 0.0
    return EmbeddingInit(mat, "pretrained", dim, coverage)
