"""Train both classifiers on a tiny synthetic corpus and classify new text.

Runs in a few seconds; nothing is downloaded.
"""

import random

import numpy as np

from sentikit import RawReview, TrainConfig, fit, split_corpus
from sentikit.corpus import clean_corpus, clean_review
from sentikit.textproc import encode_docs
from sentikit.trainer import predict_proba

POS = "great wonderful superb loved fun moving".split()
NEG = "awful boring terrible hated dull mess".split()
FILLER = "film movie plot actor scene story cast ending".split()

rng = random.Random(1)
raw = []
for i in range(200):
    label = "positive" if i % 2 else "negative"
    words = rng.sample(FILLER, 5) + rng.sample(POS if label == "positive" else NEG, 2)
    rng.shuffle(words)
    raw.append(RawReview(" ".join(words).capitalize() + "!", label))

docs = clean_corpus(raw)
split = split_corpus(docs)
print("fold sizes", split.sizes())
print("first cleaned doc", docs[0])

small = dict(max_len=10, embedding_dim=16, hidden_size=16, fc_size=16, filters=(16, 8, 4), dense_size=16,
             batch_size=16, epochs=15)
for kind in ("lstm", "cnn"):
    cfg = TrainConfig(model=kind, **small)
    model, report = fit(cfg, split)
    last = report.epochs[-1]
    print(f"{kind}: valid acc {last.valid_accuracy:.3f}, test acc {report.test.accuracy:.3f}")

    texts = ["What a wonderful, moving story!", "Dull plot and a boring mess of a film."]
    cleaned = [clean_review(RawReview(t, "negative"), cfg.clean_config) for t in texts]
    ids = np.array([s.ids for s in encode_docs(cleaned, report.vocab, cfg.max_len)])
    for t, p in zip(texts, predict_proba(model, ids)):
        print(f"   {p:.3f}  {t}")

print(report.to_csv())
