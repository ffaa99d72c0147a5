import json
import math

import numpy as np
import pytest

from core.errors import ContractViolation
from core.losses_mi import LossSpec, LossVariant, empirical_label_priors
from core.models import ConvGapModel, ConvStage, MlpModel
from core.rng import RngStream
from core.training import (
    TrainConfig,
    accuracy,
    evaluate_split,
    per_class_accuracy,
    per_class_recall,
    per_label_accuracy,
    train,
)


def test_train_config_validation():
    with pytest.raises(ContractViolation):
        TrainConfig(epochs=0)
    with pytest.raises(ContractViolation):
        TrainConfig(selection="best")


def test_classification_metrics():
    predicted = np.array([0, 0, 1, 1, 1, 2])
    labels = np.array([0, 1, 1, 1, 1, 1])
    assert accuracy(predicted, labels) == pytest.approx(4 / 6)
    recall = per_class_recall(predicted, labels, 3)
    assert recall[0] == 1.0 and recall[1] == pytest.approx(0.6)
    assert math.isnan(recall[2])
    assert per_class_accuracy(predicted, labels, 3) == pytest.approx(0.8)


def test_per_label_accuracy():
    predicted = np.array([[1, 0], [1, 1], [0, 0]])
    targets = np.array([[1, 0], [0, 1], [0, 1]])
    np.testing.assert_allclose(per_label_accuracy(predicted, targets), [2 / 3, 2 / 3])


def test_evaluate_split_softmax_and_multilabel():
    model = MlpModel.build(2, 3, hidden=(4,), init="zeros")
    X = np.ones((6, 2))
    y = np.array([0, 0, 0, 1, 2, 0])
    metrics = evaluate_split(model, X, y, LossSpec(LossVariant.SOFTMAX_CE))
    assert metrics["loss"] == pytest.approx(math.log(3.0))
    assert metrics["accuracy"] == pytest.approx(4 / 6)
    assert metrics["mi_estimate"] == 0.0

    conv = ConvGapModel((1, 6, 6), (ConvStage(3, 3, 1, 2),), 2, init="zeros")
    targets = np.array([[1, 0], [0, 1], [1, 1]])
    spec = LossSpec(LossVariant.PC_SIGMOID_MULTILABEL, label_priors=empirical_label_priors(targets))
    metrics = evaluate_split(conv, np.zeros((3, 1, 6, 6)), targets, spec)
    assert math.isnan(metrics["mi_estimate"])
    assert 0.0 <= metrics["accuracy"] <= 1.0


def _blobs(seed, n=60):
    rng = RngStream(seed, 0)
    y = rng.substream(0).integers(0, 3, n)
    centers = np.array([[0.0, 4.0], [4.0, 0.0], [-4.0, -4.0]])[y]
    return centers + rng.substream(1).normal((n, 2)), y


def test_train_records_every_epoch_and_calls_back():
    X, y = _blobs(1)
    seen = []
    model = MlpModel.build(2, 3, hidden=(8,), rng=RngStream(1, 3))
    history = train(model, X, y, LossSpec(LossVariant.SOFTMAX_CE), TrainConfig(epochs=4, batch_size=16),
                    RngStream(1, 4), X[:20], y[:20], on_epoch=seen.append)
    assert [r.epoch for r in history.records] == [1, 2, 3, 4]
    assert seen == history.records
    assert 1 <= history.best_epoch <= 4
    assert all(math.isfinite(r.val_mi_estimate) for r in history.records)


def test_train_restores_best_validation_epoch():
    X, y = _blobs(2)
    model = MlpModel.build(2, 3, hidden=(8,), rng=RngStream(2, 3))
    spec = LossSpec(LossVariant.SOFTMAX_CE)
    history = train(model, X, y, spec, TrainConfig(epochs=5, batch_size=8, lr=5e-2), RngStream(2, 4), X, y)
    best = min(history.records, key=lambda r: (r.val_loss, r.epoch))
    assert history.best_epoch == best.epoch
    assert evaluate_split(model, X, y, spec)["loss"] == pytest.approx(best.val_loss, rel=1e-12)


def test_train_without_validation_keeps_last_epoch():
    X, y = _blobs(3)
    model = MlpModel.build(2, 3, hidden=(8,), rng=RngStream(3, 3))
    history = train(model, X, y, LossSpec(LossVariant.SOFTMAX_CE), TrainConfig(epochs=3), RngStream(3, 4))
    assert history.best_epoch == 3
    assert math.isnan(history.records[-1].val_loss)


def test_train_rejects_empty_split():
    model = MlpModel.build(2, 3, hidden=(8,), rng=RngStream(0, 3))
    with pytest.raises(ContractViolation):
        train(model, np.zeros((0, 2)), np.zeros(0, dtype=int), LossSpec(LossVariant.SOFTMAX_CE),
              TrainConfig(epochs=1), RngStream(0, 4))


def test_single_digit_benchmark_trains_classification_heads(tmp_path):
    from scripts.run_digit_classification_benchmark import DigitClassificationBenchmark

    bench = DigitClassificationBenchmark(str(tmp_path), epochs=1, per_class=20, batch_size=32)
    rows = bench.run([3], balanced=False)
    assert len(rows) == 1
    row = rows[0]
    assert row["counts"] == [2, 20, 2, 20, 2, 20, 2, 20, 2, 20]
    for variant in ("softmax_ce", "pc_softmax_ce"):
        assert 0.0 <= row[f"{variant}_accuracy"] <= 1.0
        assert 0.0 <= row[f"{variant}_per_class_accuracy"] <= 1.0
        assert math.isfinite(row[f"{variant}_mi_estimate"])
    report = json.loads((tmp_path / "digits_unbalanced.json").read_text())
    assert report["seed"] == 3
    assert report["rows"][0]["counts"] == row["counts"]
    assert "mean_pc_softmax_ce_per_class_accuracy" in report
