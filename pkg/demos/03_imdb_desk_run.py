"""Desk-scale run on 5,000 IMDb reviews: train, save, reload, and sweep the learning rate.

Needs data/imdb_5k.csv (see scripts/make_imdb_subset.py). About 2 CPU-minutes
for the LSTM, plus another 2 for the sweep.
"""

import sys
import time
from pathlib import Path

from sentikit import TrainConfig, fit, load_corpus, split_corpus
from sentikit.checkpoint import load_checkpoint, save_checkpoint
from sentikit.corpus import clean_corpus
from sentikit.trainer import run_ablation

path = Path(sys.argv[1] if len(sys.argv) > 1 else "data/imdb_5k.csv")
split = split_corpus(clean_corpus(load_corpus(path)))
print("fold sizes", split.sizes())

# The LSTM has no masking, so long right-padded sequences wash out the final
# state. 64 steps covers the median review after OOV words are dropped.
cfg = TrainConfig(model="lstm", max_len=64, epochs=5)
t0 = time.process_time()
model, report = fit(cfg, split, on_epoch=lambda e: print(
    f"epoch {e.epoch}: train {e.train_accuracy:.3f}  valid {e.valid_accuracy:.3f}"))
print(f"test accuracy {report.test.accuracy:.3f} in {time.process_time() - t0:.0f} CPU-s")

ckpt = Path("lstm_demo.snt1")
save_checkpoint(model, report.vocab, cfg, ckpt, force=True)
_, vocab, cfg2 = load_checkpoint(ckpt)
print("reloaded", ckpt, "vocab", len(vocab), "config matches:", cfg2 == cfg)

sweep = run_ablation(cfg, {"learning_rate": [0.001, 0.1]}, split)
print(sweep.to_csv())
