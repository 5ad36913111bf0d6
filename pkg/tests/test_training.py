import copy
import dataclasses

import numpy as np
import pytest
import torch

from pugnn.config import ConfigError
from pugnn.synth_data import LABELED, NOT_TRAIN, TRAIN, UNLABELED
from pugnn import training
from pugnn.training import (
    EarlyStopping,
    TrainConfig,
    TrainingError,
    load_checkpoint,
    resolve_prior,
    run_repeated,
    save_checkpoint,
    train,
)


def _same_params(a, b):
    sa, sb = a.state_dict(), b.state_dict()
    return sa.keys() == sb.keys() and all(torch.equal(sa[k], sb[k]) for k in sa)


def test_defaults():
    cfg = TrainConfig()
    assert (cfg.d, cfg.fx, cfg.attention_blocks, cfg.gnn_layers) == (64, 128, 5, 2)
    assert (cfg.patience, cfg.num_runs, cfg.loss_mode, cfg.smote_enabled) == (10, 5, "nnpu", True)


@pytest.mark.parametrize(
    "change",
    [{"patience": 0}, {"num_runs": 0}, {"fx": 100}, {"loss_mode": "hinge"}, {"batch_size": 32}, {"class_prior": 1.0}],
)
def test_invalid_config(small_ds, change):
    with pytest.raises(ConfigError):
        train(small_ds, dataclasses.replace(TrainConfig(d=8, fx=16), **change))


def test_early_stopping_counter():
    es = EarlyStopping(2)
    assert [es.step(e, v) for e, v in enumerate([0.5, 0.6, 0.6, 0.55], 1)] == [False, False, False, True]
    assert es.best_epoch == 2


def test_patience_one_decreasing_f1(small_ds, tiny):
    snapshots = []

    def falling(tm, ds):
        snapshots.append(copy.deepcopy(tm.model.state_dict()))
        return 1.0 - 0.1 * len(snapshots)

    cfg = dataclasses.replace(tiny, patience=1, max_epochs=10)
    tm = train(small_ds, cfg, val_f1_fn=falling)
    assert [h["epoch"] for h in tm.history] == [1, 2]
    assert tm.best_epoch == 1 and tm.best_val_f1 == pytest.approx(0.9)
    state = tm.model.state_dict()
    assert all(torch.equal(state[k], snapshots[0][k]) for k in state)


def test_min_epochs_delays_stop(small_ds, tiny):
    cfg = dataclasses.replace(tiny, patience=1, max_epochs=6, min_epochs=4)
    tm = train(small_ds, cfg, val_f1_fn=lambda tm, ds: 0.5)
    assert len(tm.history) == 4 and tm.best_epoch == 1


def test_deterministic(small_ds, tiny):
    a, b = train(small_ds, tiny), train(small_ds, tiny)
    assert a.history == b.history
    assert _same_params(a.model, b.model)
    c = train(small_ds, dataclasses.replace(tiny, seed=1))
    assert c.history != a.history


def test_history_shape(small_ds, tiny):
    tm = train(small_ds, tiny)
    assert [h["epoch"] for h in tm.history] == list(range(1, len(tm.history) + 1))
    assert all(np.isfinite(h["train_loss"]) for h in tm.history)
    assert tm.best_val_f1 == max(h["val_f1"] for h in tm.history)


def test_checkpoint_round_trip(small_ds, tiny, tmp_path):
    tm = train(small_ds, tiny)
    save_checkpoint(tm, tmp_path / "m.pt")
    back = load_checkpoint(tmp_path / "m.pt", expected=tiny)
    assert back.validation_f1(small_ds) == tm.best_val_f1
    assert np.array_equal(back.scores(small_ds), tm.scores(small_ds))
    assert back.history == tm.history and back.best_epoch == tm.best_epoch
    assert torch.equal(back.link_params.weight, tm.link_params.weight)


def test_checkpoint_rejects_mismatch(small_ds, tiny, tmp_path):
    save_checkpoint(train(small_ds, tiny), tmp_path / "m.pt")
    with pytest.raises(ValueError, match="hidden"):
        load_checkpoint(tmp_path / "m.pt", expected=dataclasses.replace(tiny, hidden=16))
    load_checkpoint(tmp_path / "m.pt", expected=dataclasses.replace(tiny, seed=9))  # seed may differ


def test_checkpoint_rejects_foreign_file(tmp_path):
    torch.save({"format": "something-else"}, tmp_path / "x.pt")
    with pytest.raises(ValueError, match="pugnn-checkpoint"):
        load_checkpoint(tmp_path / "x.pt")


def test_no_labeled_positives(small_ds, tiny):
    tl = np.where(small_ds.split == TRAIN, UNLABELED, NOT_TRAIN).astype(np.int8)
    ds = dataclasses.replace(small_ds, train_label=tl)
    with pytest.raises(TrainingError, match="no labeled positives"):
        train(ds, tiny)


def test_divergence_reports_epoch(small_ds, tiny, monkeypatch):
    real = training._loss
    calls = []

    def flaky(t, *args):
        calls.append(1)
        loss = real(t, *args)
        return loss * float("nan") if len(calls) == 3 else loss

    monkeypatch.setattr(training, "_loss", flaky)
    with pytest.raises(TrainingError, match="epoch 3"):
        train(small_ds, dataclasses.replace(tiny, max_epochs=5, patience=5))


def test_dataset_untouched_and_full_graph_inference(small_ds, tiny):
    before = copy.deepcopy(small_ds)
    tm = train(small_ds, tiny)
    assert small_ds == before
    assert tm.scores(small_ds).shape == (small_ds.num_players,)


@pytest.mark.parametrize("mode", ["upu", "ce"])
def test_other_loss_modes_run(small_ds, tiny, mode):
    tm = train(small_ds, dataclasses.replace(tiny, loss_mode=mode, max_epochs=2))
    assert len(tm.history) == 2


def test_transductive_and_mean_model(small_ds, tiny):
    tm = train(small_ds, dataclasses.replace(tiny, inductive=False, model="mean", max_epochs=2))
    assert np.all(np.abs(tm.predict(small_ds)) <= 1)


def test_prior_resolution(small_ds, tiny):
    assert resolve_prior(small_ds, tiny) == small_ds.class_prior
    assert resolve_prior(small_ds, dataclasses.replace(tiny, class_prior=0.3)) == 0.3
    train_idx = small_ds.indices(TRAIN)
    assert small_ds.class_prior == pytest.approx(np.mean(small_ds.labels[train_idx] == 1))
    assert np.all(small_ds.train_label[train_idx] != NOT_TRAIN)
    assert np.any(small_ds.train_label == LABELED)


def test_run_repeated_single(small_ds, tiny):
    rep = run_repeated(small_ds, tiny)
    assert rep.seeds == [tiny.seed]
    assert all(v == 0.0 for v in rep.std().values())
    assert rep.mean()["f1"] == rep.runs[0].f1


def test_run_repeated_many(small_ds, tiny):
    rep = run_repeated(small_ds, dataclasses.replace(tiny, num_runs=3, seed=4))
    assert rep.seeds == [4, 5, 6]
    assert len({str(h) for h in rep.histories}) == 3
    for m, mean in rep.mean().items():
        vals = [getattr(r, m) for r in rep.runs]
        assert min(vals) <= mean <= max(vals)
