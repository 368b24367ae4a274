import dataclasses
import json

import numpy as np
import pytest

from mataformer.config import TrainConfig
from mataformer.errors import NumericalError
from mataformer.model import MataFormer
from mataformer.testing import tiny_experiment
from mataformer.training import trainer
from mataformer.training.trainer import build_optimizer, predict, train, validation_report


def test_optimizer_groups_partition_parameters():
    _, config = tiny_experiment()
    model = MataFormer(config.model)
    opt = build_optimizer(model, config.train)
    assert [g.name for g in opt.groups] == ["backbone", "predictor"]
    ids = [id(p) for g in opt.groups for p in g.params]
    assert len(ids) == len(set(ids)) == len(model.parameters())

    opt.set_lr(2e-4)
    rates = opt.learning_rates()
    assert rates["predictor"] == pytest.approx(10 * rates["backbone"])


def test_train_writes_history_and_keeps_lr_ratio(tmp_path):
    data, config = tiny_experiment()
    model = MataFormer(config.model)
    history_path = tmp_path / "history.jsonl"
    result = train(model, data.subset(range(6)), data.subset(range(6, 9)), config.train, history_path)

    lines = history_path.read_text().splitlines()
    assert len(lines) == len(result.history) == config.train.max_epochs
    for line in lines:
        record = json.loads(line)
        assert {"epoch", "loss", "lr", "metrics", "val_loss"} <= set(record)
        assert np.isfinite(record["loss"])
        lr = record["lr"]
        assert lr["predictor"] == pytest.approx(10 * lr["backbone"])
    assert 0 <= result.best_epoch < config.train.max_epochs


def test_predict_matches_per_trajectory_forward():
    data, config = tiny_experiment()
    model = MataFormer(config.model)
    batched = predict(model, data, batch_size=4)
    for traj, pred in zip(data.trajectories, batched):
        single = model(traj.embeddings[None], traj.times()[None]).data[0]
        assert pred.shape == (len(traj), 8, 4)
        assert np.allclose(pred, single, atol=1e-12), "padding must not leak into valid positions"


def test_early_stopping_restores_best_epoch(monkeypatch):
    data, config = tiny_experiment()
    scores = iter([0.9, 0.5, 0.4, 0.3, 0.2])
    monkeypatch.setattr(trainer, "_score", lambda report, loss: next(scores))
    cfg = dataclasses.replace(config.train, max_epochs=5, early_stop_patience=2)
    val = data.subset(range(6, 9))
    model = MataFormer(config.model)

    result = train(model, data.subset(range(6)), val, cfg)
    assert result.stopped_early
    assert result.best_epoch == 0
    assert len(result.history) == 3
    assert validation_report(model, val, cfg) == result.history[0]["metrics"], "best parameters restored"


def test_nan_loss_dumps_batch(tmp_path):
    data, config = tiny_experiment()
    model = MataFormer(config.model)
    model.head.weight.data[:] = np.nan
    with pytest.raises(NumericalError) as err:
        train(model, data.subset(range(6)), None, config.train, dump_dir=tmp_path)
    assert err.value.dump_path is not None
    with np.load(err.value.dump_path) as dump:
        assert {"x", "t", "y", "lengths", "patient_ids"} <= set(dump.files)


def test_rejects_empty_training_set():
    data, config = tiny_experiment()
    with pytest.raises(ValueError):
        train(MataFormer(config.model), data.subset([]), None, config.train)


@pytest.mark.slow
def test_loss_trend_on_planted_cohort():
    data, config = tiny_experiment(n_patients=60, max_epochs=10, early_stop_patience=10)
    model = MataFormer(dataclasses.replace(config.model, n_layers=2, d_model=32, n_heads=4))
    result = train(model, data.subset(range(48)), None, TrainConfig(max_epochs=10, early_stop_patience=10))
    losses = [r["loss"] for r in result.history]
    assert all(a > b for a, b in zip(losses, losses[1:])), f"epoch losses {losses}"
