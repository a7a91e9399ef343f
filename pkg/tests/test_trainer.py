import dataclasses
import hashlib
import json

import numpy as np
import pytest

from sentikit.optim import AdamState
from sentikit.textproc import EncodedSeq, build_vocabulary, encode_docs, make_batches
from sentikit.trainer import (
    AblationReport,
    ConfigError,
    TrainConfig,
    TrainingDiverged,
    build_model,
    evaluate,
    fit,
    run_ablation,
    train_epoch,
)

SMALL = dict(max_len=8, embedding_dim=8, hidden_size=8, fc_size=8, filters=(8, 8, 4), dense_size=8)


def params_hash(model) -> str:
    h = hashlib.sha256()
    for name, t in model.parameters().items():
        h.update(name.encode())
        h.update(t.data.tobytes())
    return h.hexdigest()


def batches_for(split, cfg, docs=None, bs=None):
    vocab = build_vocabulary(split.train, cfg.vocab_size)
    seqs = encode_docs(docs if docs is not None else split.train, vocab, cfg.max_len)
    return vocab, make_batches(seqs, bs or cfg.batch_size)


def test_config_validation_names_field():
    with pytest.raises(ConfigError) as exc:
        TrainConfig(learning_rate=-1).validate()
    assert exc.value.field == "learning_rate"
    for bad in (dict(batch_size=0), dict(epochs=0), dict(model="rnn"), dict(activation="gelu"),
                dict(kernel_size=4), dict(dropout=1.0)):
        with pytest.raises(ConfigError):
            TrainConfig(**bad).validate()


def test_config_roundtrip():
    cfg = TrainConfig(model="cnn", filters=(4, 3, 2), stopwords="x.txt")
    assert TrainConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg
    with pytest.raises(ConfigError):
        TrainConfig.from_dict({"nope": 1})


def test_defaults_follow_ablation_winners():
    cfg = TrainConfig()
    assert cfg.learning_rate == 0.001 and cfg.batch_size == 32
    assert cfg.max_len == 1000 and cfg.vocab_size == 1000


@pytest.mark.parametrize("model", ["lstm", "cnn"])
def test_zero_learning_rate_leaves_parameters(toy_split, model):
    cfg = TrainConfig(model=model, batch_size=4, **SMALL)
    vocab, batches = batches_for(toy_split, cfg)
    m = build_model(cfg, len(vocab))
    before = params_hash(m)
    train_epoch(m, batches, AdamState(lr=0.0), np.random.default_rng(0))
    assert params_hash(m) == before


def test_train_epoch_metrics_cover_every_example(toy_split):
    cfg = TrainConfig(batch_size=5, **SMALL)
    vocab, batches = batches_for(toy_split, cfg)
    m = build_model(cfg, len(vocab))
    metrics = train_epoch(m, batches, AdamState(), np.random.default_rng(0))
    assert metrics.count == len(toy_split.train)
    assert 0 <= metrics.accuracy <= 1 and metrics.loss >= 0


def test_overfit_single_example(toy_split):
    cfg = TrainConfig(batch_size=1, **SMALL)
    vocab = build_vocabulary(toy_split.train, cfg.vocab_size)
    seqs = encode_docs(toy_split.train[:1], vocab, cfg.max_len)
    batches = make_batches(seqs, 1)
    m = build_model(cfg, len(vocab))
    adam, rng = AdamState(), np.random.default_rng(0)
    for _ in range(200):
        train_epoch(m, batches, adam, rng)
    assert evaluate(m, batches).accuracy == 1.0


def test_evaluate_is_pure_and_repeatable(toy_split):
    cfg = TrainConfig(**SMALL)
    vocab, batches = batches_for(toy_split, cfg, bs=7)
    m = build_model(cfg, len(vocab))
    before = params_hash(m)
    a, b = evaluate(m, batches), evaluate(m, batches)
    assert a == b and params_hash(m) == before


def test_untrained_model_near_chance():
    rng = np.random.default_rng(0)
    seqs = [EncodedSeq(tuple(rng.integers(0, 51, size=8)), i % 2) for i in range(400)]
    for model in ("lstm", "cnn"):
        m = build_model(TrainConfig(model=model, **SMALL), 50)
        assert abs(evaluate(m, make_batches(seqs, 64)).accuracy - 0.5) <= 0.1


def test_non_finite_loss_aborts_with_last_good(toy_split):
    cfg = TrainConfig(**SMALL)
    vocab, batches = batches_for(toy_split, cfg)
    m = build_model(cfg, len(vocab))
    m.out.b.data[:] = np.nan
    with pytest.raises(TrainingDiverged) as exc:
        train_epoch(m, batches, AdamState(), np.random.default_rng(0))
    assert set(exc.value.last_good) == set(m.parameters())


def test_fit_report_shape_and_determinism(toy_split):
    cfg = TrainConfig(epochs=3, batch_size=4, **SMALL)
    m1, r1 = fit(cfg, toy_split)
    m2, r2 = fit(cfg, toy_split)
    assert [e.epoch for e in r1.epochs] == [1, 2, 3]
    assert r1.to_csv() == r2.to_csv()
    assert params_hash(m1) == params_hash(m2)
    assert r1.test.count == len(toy_split.test)
    assert r1.to_csv().splitlines()[0] == "epoch,train_loss,train_accuracy,valid_loss,valid_accuracy"
    assert json.loads(r1.to_json())["config"]["epochs"] == 3


def test_fit_rejects_empty_fold(toy_split):
    with pytest.raises(ValueError):
        fit(TrainConfig(**SMALL), dataclasses.replace(toy_split, test=[]))


def test_fit_loss_descends(toy_split):
    _, report = fit(TrainConfig(epochs=50, batch_size=8, **SMALL), toy_split)
    assert report.epochs[-1].train_loss < report.epochs[0].train_loss


def test_fit_with_pretrained_vectors(toy_split, tmp_path):
    vec = tmp_path / "vec.txt"
    vec.write_text("great " + " ".join(["0.5"] * 8) + "\n", encoding="utf-8")
    model, report = fit(TrainConfig(epochs=1, embedding=str(vec), **SMALL), toy_split)
    row = report.vocab["great"]
    assert report.epochs and model.embedding.E.data.shape[1] == 8
    assert np.all(model.embedding.E.data[0] == 0)
    assert row >= 1


def test_ablation_grid_order_and_rows(toy_split):
    base = TrainConfig(epochs=1, batch_size=4, **SMALL)
    rep = run_ablation(base, {"activation": ["relu", "tanh", "sigmoid"]}, toy_split)
    assert isinstance(rep, AblationReport)
    assert [r.delta for r in rep.rows] == [{"activation": a} for a in ("relu", "tanh", "sigmoid")]
    assert all(r.seed == base.seed and r.epochs == 1 for r in rep.rows)
    assert rep.to_csv().splitlines()[0] == "index,activation,valid_accuracy,valid_loss,epochs,seed"


def test_ablation_cartesian_product_and_rerun(toy_split):
    base = TrainConfig(epochs=1, **SMALL)
    grid = {"learning_rate": [0.1, 0.001], "batch_size": [4, 8]}
    rep = run_ablation(base, grid, toy_split)
    assert [tuple(r.delta.values()) for r in rep.rows] == [(0.1, 4), (0.1, 8), (0.001, 4), (0.001, 8)]
    single = run_ablation(base, {"learning_rate": [0.001], "batch_size": [8]}, toy_split)
    assert single.rows[0].valid_accuracy == rep.rows[3].valid_accuracy
    assert single.rows[0].valid_loss == rep.rows[3].valid_loss


def test_ablation_parallel_matches_serial(toy_split):
    base = TrainConfig(epochs=1, **SMALL)
    grid = {"batch_size": [2, 4, 8]}
    serial = run_ablation(base, grid, toy_split)
    parallel = run_ablation(base, grid, toy_split, workers=2)
    assert serial.to_csv() == parallel.to_csv()


def test_ablation_per_point_seeds(toy_split):
    rep = run_ablation(TrainConfig(epochs=1, seed=5, **SMALL), {"batch_size": [4, 8]}, toy_split,
                       per_point_seeds=True)
    assert [r.seed for r in rep.rows] == [5, 6]


def test_ablation_rejects_bad_grids(toy_split):
    base = TrainConfig(**SMALL)
    with pytest.raises(ValueError):
        run_ablation(base, {}, toy_split)
    with pytest.raises(ConfigError):
        run_ablation(base, {"dropout": [0.1]}, toy_split)
    with pytest.raises(ValueError):
        run_ablation(base, {"batch_size": []}, toy_split)
