"""Sentiment classification of movie reviews with numpy-only LSTM and CNN models."""

from .autodiff import Tape, Tensor, gradient_check
from .corpus import CleanConfig, CleanedDoc, CorpusSplit, RawReview, clean_text, load_corpus, split_corpus
from .textproc import Vocabulary, build_vocabulary, encode, make_batches, pad_truncate
from .trainer import TrainConfig, evaluate, fit, run_ablation

__all__ = [
    "CleanConfig",
    "CleanedDoc",
    "CorpusSplit",
    "RawReview",
    "Tape",
    "Tensor",
    "TrainConfig",
    "Vocabulary",
    "build_vocabulary",
    "clean_text",
    "encode",
    "evaluate",
    "fit",
    "gradient_check",
    "load_corpus",
    "make_batches",
    "pad_truncate",
    "run_ablation",
    "split_corpus",
]
__version__ = "0.1.0"
