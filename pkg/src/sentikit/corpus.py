"""Loading labeled review CSVs, cleaning review text and splitting folds."""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

LABELS = {"negative": 0, "positive": 1}
LABEL_NAMES = {v: k for k, v in LABELS.items()}

_HTML_TAG = re.compile(r"<[^>]*>")
_URL = re.compile(r"https?://\S*", re.IGNORECASE)
_NON_WORD = {True: re.compile(r"[^a-z0-9]"), False: re.compile(r"[^A-Za-z0-9]")}
_DIGITS = re.compile(r"[0-9]")
_SPACES = re.compile(r" {2,}")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class RawReview:
    text: str
    label: str  # "positive" or "negative"

    def __post_init__(self):
        if self.label not in LABELS:
            raise CorpusError(f"label must be 'positive' or 'negative', got {self.label!r}")


@dataclass(frozen=True)
class CleanConfig:
    strip_html_urls: bool = False
    lowercase: bool = True
    stopword_path: str | None = None  # None selects the bundled English list
    filter_stopwords: bool = True


@dataclass(frozen=True)
class CleanedDoc:
    tokens: tuple[str, ...]
    label: int


@dataclass(frozen=True)
class CorpusSplit:
    train: list[CleanedDoc] = field(default_factory=list)
    valid: list[CleanedDoc] = field(default_factory=list)
    test: list[CleanedDoc] = field(default_factory=list)

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.valid), len(self.test)


def normalize_label(value: str) -> str | None:
    v = value.strip().casefold()
    return v if v in LABELS else None


def load_corpus(path: str | Path) -> list[RawReview]:
    """Read a ``review,sentiment`` CSV, keeping file order.

    Header names are matched case-insensitively; sentiment values are
    trimmed and casefolded before being checked against the two labels.
    """
    path = Path(path)
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")
    reviews = []
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CorpusError(f"{path}: empty file, expected header 'review,sentiment'") from None
        cols = [h.strip().lstrip("﻿").casefold() for h in header]
        if "review" not in cols or "sentiment" not in cols:
            raise CorpusError(f"{path}: header must contain 'review' and 'sentiment', got {header}")
        i_text, i_label = cols.index("review"), cols.index("sentiment")
        for row_no, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) <= max(i_text, i_label):
                raise CorpusError(f"{path}: data row {row_no} has {len(row)} fields")
            label = normalize_label(row[i_label])
            if label is None:
                raise CorpusError(
                    f"{path}: data row {row_no}: sentiment {row[i_label]!r} is not 'positive' or 'negative'"
                )
            reviews.append(RawReview(row[i_text], label))
    return reviews


def clean_text(raw: str, cfg: CleanConfig = CleanConfig()) -> str:
    """Reduce a review to space-separated alphabetic words.

    Steps, in order: optional HTML tag / URL removal, lowercasing,
    non-alphanumerics to spaces, digit deletion, whitespace collapse, trim.
    """
    text = raw
    if cfg.strip_html_urls:
        text = _URL.sub(" ", _HTML_TAG.sub(" ", text))
    if cfg.lowercase:
        text = text.lower()
    text = _NON_WORD[cfg.lowercase].sub(" ", text)
    text = _DIGITS.sub("", text)
    return _SPACES.sub(" ", text).strip(" ")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    if path is None:
        content = resources.files("sentikit.data").joinpath("stopwords_en.txt").read_text(encoding="utf-8")
    else:
        p = Path(path)
        if not p.is_file():
            raise CorpusError(f"stopword file not found: {p}")
        content = p.read_text(encoding="utf-8")
    words = frozenset(
        line.strip() for line in content.splitlines() if line.strip() and not line.lstrip().startswith("#")
    )
    if not words:
        raise CorpusError(f"stopword file {path} contains no words")
    return words


def filter_stopwords(tokens: Sequence[str], stopwords: Iterable[str]) -> list[str]:
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [t for t in tokens if t not in stop]


def clean_review(review: RawReview, cfg: CleanConfig, stopwords: frozenset[str] | None = None) -> CleanedDoc:
    tokens = clean_text(review.text, cfg).split()
    if cfg.filter_stopwords:
        tokens = filter_stopwords(tokens, stopwords if stopwords is not None else load_stopwords(cfg.stopword_path))
    return CleanedDoc(tuple(tokens), LABELS[review.label])


def clean_corpus(reviews: Sequence[RawReview], cfg: CleanConfig = CleanConfig()) -> list[CleanedDoc]:
    stop = load_stopwords(cfg.stopword_path) if cfg.filter_stopwords else frozenset()
    return [clean_review(r, cfg, stop) for r in reviews]


def split_corpus(docs: Sequence[CleanedDoc]) -> CorpusSplit:
    """First 70% train; the remaining tail is halved in order, valid then test."""
    n = len(docs)
    n_train = (7 * n) // 10
    n_valid = (n - n_train) // 2
    if n < 10 or n_valid == 0 or n_train == 0:
        raise CorpusError(f"corpus of {n} documents is too small for train/valid/test folds (need >= 10)")
    docs = list(docs)
    return CorpusSplit(docs[:n_train], docs[n_train : n_train + n_valid], docs[n_train + n_valid :])
