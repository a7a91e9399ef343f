"""Write a balanced, shuffled ``review,sentiment`` CSV of IMDb reviews.

The reviews come from the ``movie-reviews`` PyPI package, which bundles the
25,000-review IMDb training set alongside Rotten Tomatoes snippets.

    python scripts/make_imdb_subset.py --size 5000 --out data/imdb_5k.csv
"""

from __future__ import annotations

import argparse
import csv
from importlib import resources
from pathlib import Path

import numpy as np


def imdb_rows() -> list[tuple[str, int]]:
    src = resources.files("movie_reviews").joinpath("data/combined_movie_reviews.csv")
    rows = []
    with src.open(encoding="utf-8", newline="") as fh:
        for rec in csv.DictReader(fh):
            if rec["source"] == "imdb":
                rows.append((rec["text"], int(rec["label"])))
    return rows


def make_subset(out: Path, size: int = 5000, seed: int = 2022) -> Path:
    rows = imdb_rows()
    rng = np.random.default_rng(seed)
    per_class = size // 2
    picked = []
    for label in (0, 1):
        idx = [i for i, (_, y) in enumerate(rows) if y == label]
        picked.extend(rng.choice(idx, size=per_class, replace=False).tolist())
    picked = [picked[i] for i in rng.permutation(len(picked))]
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["review", "sentiment"])
        for i in picked:
            text, y = rows[i]
            w.writerow([text, "positive" if y else "negative"])
    return out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=5000)
    ap.add_argument("--seed", type=int, default=2022)
    ap.add_argument("--out", type=Path, default=Path("data/imdb_5k.csv"))
    args = ap.parse_args()
    print(make_subset(args.out, args.size, args.seed))


if __name__ == "__main__":
    main()
