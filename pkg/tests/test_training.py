from __future__ import annotations

import numpy as np
import pytest

from slrkit.nn import Dims, init_params
from slrkit.training import (
    EarlyStopper,
    LabeledDataset,
    TrainConfig,
    evaluate,
    history_csv,
    metrics_json,
    pad_batch,
    result_summary,
    train,
)

SMALL = Dims(input=138, mlp_hidden=12, gru_hidden=16, num_classes=3)


@pytest.fixture(scope="module")
def small_sets(tiny_dataset):
    sequences, _ = tiny_dataset
    data = LabeledDataset.from_sequences(sequences)
    return data


class TestEarlyStopper:
    def test_stops_at_best_plus_patience(self):
        # loss improves until epoch 3, then plateaus
        losses = [1.0, 0.9, 0.5, 0.5, 0.6, 0.55, 0.7, 0.8, 0.9]
        stopper = EarlyStopper(patience=4)
        stopped_at = None
        for loss in losses:
            if stopper.update(loss):
                stopped_at = stopper.epoch
                break
        assert stopper.best_epoch == 3
        assert stopped_at == 3 + 4

    def test_increasing_after_first_epoch(self):
        stopper = EarlyStopper(patience=1)
        assert not stopper.update(1.0)
        assert stopper.update(2.0)
        assert stopper.best_epoch == 1
        assert stopper.epoch == 2

    def test_late_improvement_resets_patience(self):
        stopper = EarlyStopper(patience=3)
        for loss in [1.0, 0.99, 0.98, 0.5]:
            assert not stopper.update(loss)
        assert stopper.best_epoch == 4

    def test_equal_loss_is_no_improvement(self):
        stopper = EarlyStopper(patience=2)
        assert not stopper.update(1.0)
        assert not stopper.update(1.0)
        assert stopper.update(1.0)
        assert stopper.best_epoch == 1


class TestTrainConfig:
    def test_defaults_match_protocol(self):
        config = TrainConfig()
        assert config.learning_rate == 1e-5
        assert config.batch_size == 32
        assert config.patience_epochs == 200

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0).validate()
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0).validate()
        with pytest.raises(ValueError):
            TrainConfig(patience_epochs=0).validate()
        with pytest.raises(ValueError):
            TrainConfig(monitor="test_loss").validate()


class TestPadBatch:
    def test_shapes_and_mask_lengths(self):
        features = [np.ones((3, 5)), np.ones((7, 5)), np.ones((1, 5))]
        x, lengths = pad_batch(features)
        assert x.shape == (3, 7, 5)
        np.testing.assert_array_equal(lengths, [3, 7, 1])
        assert not np.any(x[0, 3:])
        assert not np.any(x[2, 1:])


class TestTrain:
    def test_stops_when_patience_exhausted(self, small_sets):
        # lr far past stable: loss rises after epoch 1, so patience (not the
        # cap) ends the run at exactly best + patience
        params = init_params(SMALL, seed=0)
        config = TrainConfig(learning_rate=1.0, patience_epochs=3, seed=0,
                             max_epochs=500)
        result = train(params, small_sets, config)
        assert result.stopped_epoch == result.best_loss_epoch + 3
        assert len(result.history) == result.stopped_epoch
        assert result.best_loss_epoch <= result.stopped_epoch

    def test_max_epochs_binds(self, small_sets):
        params = init_params(SMALL, seed=0)
        config = TrainConfig(max_epochs=4, patience_epochs=200, seed=0)
        result = train(params, small_sets, config)
        assert result.stopped_epoch == 4
        assert len(result.history) == 4

    def test_deterministic_history(self, small_sets):
        outs = []
        for _ in range(2):
            params = init_params(SMALL, seed=5)
            config = TrainConfig(max_epochs=5, seed=5, learning_rate=1e-4)
            outs.append(train(params, small_sets, config))
        assert [r.loss for r in outs[0].history] == [r.loss for r in outs[1].history]
        for name, tensor in outs[0].params.tensors():
            np.testing.assert_array_equal(tensor, getattr(outs[1].params, name))

    def test_best_params_snapshot_is_best_epoch(self, small_sets):
        params = init_params(SMALL, seed=1)
        config = TrainConfig(max_epochs=6, learning_rate=1e-3, seed=1)
        result = train(params, small_sets, config)
        best = min(result.history, key=lambda r: r.loss)
        assert result.best_loss_epoch == best.epoch

    def test_eval_history_and_best_metric_epochs(self, small_sets):
        params = init_params(SMALL, seed=2)
        config = TrainConfig(max_epochs=5, learning_rate=1e-3, seed=2)
        result = train(params, small_sets, config, eval_set=small_sets)
        assert all(r.accuracy is not None for r in result.history)
        for metric in ("accuracy", "macro_f1"):
            epoch = result.best_metric_epochs[metric]
            values = [getattr(r, metric) for r in result.history]
            assert values[epoch - 1] == max(values)
            assert values.index(max(values)) + 1 == epoch  # earliest epoch wins

    def test_label_outside_class_map(self, small_sets):
        params = init_params(SMALL, seed=0)
        with pytest.raises(ValueError, match="outside"):
            LabeledDataset(
                features=small_sets.features,
                labels=["mystery"] * len(small_sets.labels),
                label_map=small_sets.label_map,
            )

    def test_class_count_mismatch(self, small_sets):
        params = init_params(Dims(138, 12, 16, 7), seed=0)
        with pytest.raises(ValueError, match="classes"):
            train(params, small_sets, TrainConfig(max_epochs=1))

    def test_eval_loss_monitor_requires_eval_set(self, small_sets):
        params = init_params(SMALL, seed=0)
        with pytest.raises(ValueError, match="eval"):
            train(params, small_sets, TrainConfig(monitor="eval_loss"))


class TestEvaluate:
    def test_perfect_and_constant_predictions(self, small_sets):
        params = init_params(SMALL, seed=3)
        config = TrainConfig(learning_rate=3e-3, max_epochs=60, patience_epochs=60, seed=3)
        result = train(params, small_sets, config)
        metrics = evaluate(result.params, small_sets)
        if metrics.accuracy == 100.0:
            assert metrics.macro_f1 == 100.0
            assert np.trace(metrics.confusion.counts) == len(small_sets)

    def test_batch_size_neutrality(self, small_sets):
        params = init_params(SMALL, seed=4)
        one = evaluate(params, small_sets, batch_size=1)
        many = evaluate(params, small_sets, batch_size=32)
        np.testing.assert_array_equal(one.confusion.counts, many.confusion.counts)

    def test_empty_dataset(self):
        params = init_params(SMALL, seed=0)
        empty = LabeledDataset(features=[], labels=[], label_map={"a": 0, "b": 1, "c": 2})
        with pytest.raises(ValueError, match="empty"):
            evaluate(params, empty)


class TestHistoryOutputs:
    def test_history_csv_shape(self, small_sets):
        params = init_params(SMALL, seed=0)
        result = train(params, small_sets, TrainConfig(max_epochs=3, seed=0),
                       eval_set=small_sets)
        text = history_csv(result.history)
        lines = text.strip().split("\n")
        assert lines[0] == "epoch,loss,accuracy,macro_f1"
        assert len(lines) == 4
        assert lines[1].startswith("1,")

    def test_history_csv_blank_metrics_without_eval(self, small_sets):
        params = init_params(SMALL, seed=0)
        result = train(params, small_sets, TrainConfig(max_epochs=2, seed=0))
        lines = history_csv(result.history).strip().split("\n")
        assert lines[1].endswith(",,")

    def test_summary_fields(self, small_sets):
        params = init_params(SMALL, seed=0)
        result = train(params, small_sets, TrainConfig(max_epochs=3, seed=0))
        summary = result_summary(result)
        assert summary["stopped_epoch"] == 3
        assert summary["config"]["batch_size"] == 32
        assert "best_loss" in summary

    def test_metrics_json_schema(self, small_sets):
        params = init_params(SMALL, seed=0)
        metrics = evaluate(params, small_sets)
        payload = metrics_json(metrics, best_epoch=7, stopped_epoch=9)
        assert set(payload) == {"accuracy", "macro_f1", "confusion", "best_epoch",
                                "stopped_epoch"}
        assert payload["best_epoch"] == 7
        assert isinstance(payload["confusion"], list)
