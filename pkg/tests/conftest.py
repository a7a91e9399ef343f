import csv
import os
import sys
from pathlib import Path

import pytest

from sentikit.corpus import CleanedDoc, CorpusSplit

ROOT = Path(__file__).resolve().parents[1]

POSITIVE = "great wonderful superb brilliant loved enjoyable moving beautiful masterpiece fun".split()
NEGATIVE = "awful boring terrible dull hated waste poor stupid mess worst".split()
NEUTRAL = "film movie plot actor scene story director cast script ending".split()


def toy_reviews(n: int = 32, seed: int = 0) -> list[tuple[str, str]]:
    """Balanced synthetic reviews, alternating labels, for overfit and plumbing tests."""
    import random

    rng = random.Random(seed)
    rows = []
    for i in range(n):
        label = "positive" if i % 2 == 0 else "negative"
        cue = POSITIVE if label == "positive" else NEGATIVE
        words = rng.sample(NEUTRAL, 4) + rng.sample(cue, 2)
        rng.shuffle(words)
        rows.append(("The " + " ".join(words) + "!", label))
    return rows


def write_reviews(path: Path, rows) -> Path:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["review", "sentiment"])
        w.writerows(rows)
    return path


@pytest.fixture
def toy_csv(tmp_path) -> Path:
    return write_reviews(tmp_path / "toy.csv", toy_reviews(40))


@pytest.fixture
def toy_split() -> CorpusSplit:
    docs = []
    for text, label in toy_reviews(40):
        tokens = tuple(w.strip("!").lower() for w in text.split()[1:])
        docs.append(CleanedDoc(tokens, int(label == "positive")))
    return CorpusSplit(docs[:28], docs[28:34], docs[34:])


@pytest.fixture(scope="session")
def imdb_subset_csv() -> Path:
    """5,000 balanced IMDb reviews, built from the ``movie-reviews`` package.

    Set ``SENTIKIT_IMDB_CSV`` to use an existing ``review,sentiment`` file.
    """
    given = os.environ.get("SENTIKIT_IMDB_CSV")
    if given:
        return Path(given)
    cached = ROOT / "data" / "imdb_5k.csv"
    if cached.is_file():
        return cached
    sys.path.insert(0, str(ROOT / "scripts"))
    from make_imdb_subset import make_subset

    return make_subset(cached, size=5000)
