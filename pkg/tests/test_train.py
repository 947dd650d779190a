import json

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import auc_pairs

from scapecap import vocab
from scapecap.errors import CacheMissError, DegenerateClassError, EmptySplitError
from scapecap.model.network import ModelConfig, PredictionBundle, init_params, load_checkpoint
from scapecap.objectives import LabelSet
from scapecap.train import (
    TrainConfig,
    early_stop_check,
    evaluate_metrics,
    load_split,
    macro_auc,
    metrics_from_predictions,
    predict,
    roc_auc,
    train,
)

SMALL = ModelConfig(filters=(2, 2, 2), embed_dim=4, edge_dim=4, common_dim=8, head_hidden=4)
CFG = TrainConfig()


class TestEarlyStopping:
    def test_decreasing_never_stops(self):
        curve = list(np.linspace(1.0, 0.1, 100))
        assert not any(early_stop_check(curve, e, CFG) for e in range(1, 101))

    def test_flat_from_start_stops_at_twenty(self):
        curve = [1.0] * 100
        fired = [e for e in range(1, 101) if early_stop_check(curve, e, CFG)]
        assert fired[0] == 20

    def test_best_at_twelve(self):
        curve = [1.0 - 0.01 * e for e in range(1, 13)] + [0.88] * 20
        assert not early_stop_check(curve, 21, CFG)
        assert early_stop_check(curve, 22, CFG)

    def test_late_improvement_resets(self):
        curve = [1.0 - 0.01 * e for e in range(1, 13)] + [0.88] * 8 + [0.5] + [0.5] * 20
        assert not early_stop_check(curve, 21, CFG)
        assert not early_stop_check(curve, 30, CFG)
        assert early_stop_check(curve, 31, CFG)

    def test_equal_value_is_not_improvement(self):
        curve = [1.0] * 12 + [0.5] * 30
        assert not early_stop_check(curve, 22, CFG)
        assert early_stop_check(curve, 23, CFG)

    def test_before_start_never(self):
        cfg = TrainConfig(patience=2, patience_start_epoch=10)
        assert not any(early_stop_check([1.0] * 9, e, cfg) for e in range(1, 10))

    @given(st.lists(st.floats(0, 1), min_size=1, max_size=60))
    def test_matches_window_rule(self, curve):
        for epoch in range(1, len(curve) + 1):
            prefix = curve[:epoch]
            best = prefix.index(min(prefix)) + 1
            expected = epoch >= 10 and epoch - max(best, 10) >= 10
            assert early_stop_check(curve, epoch, CFG) == expected


class TestAUC:
    def test_separated(self):
        assert roc_auc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0

    def test_inverted(self):
        assert roc_auc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0

    def test_all_ties(self):
        assert roc_auc([0.5] * 6, [0, 1, 0, 1, 1, 0]) == 0.5

    @given(st.integers(2, 50), st.integers(0, 2**31 - 1))
    @settings(max_examples=100)
    def test_pair_counting_oracle(self, n, seed):
        rng = np.random.default_rng(seed)
        labels = rng.integers(0, 2, n)
        labels[0], labels[1] = 0, 1
        scores = np.round(rng.uniform(size=n), 1)  # coarse grid forces ties
        assert roc_auc(scores, labels) == pytest.approx(auc_pairs(scores, labels), abs=1e-12)

    def test_monotone_invariance(self, rng):
        labels = rng.integers(0, 2, 40)
        scores = rng.normal(size=40)
        assert roc_auc(np.exp(3 * scores) + 1, labels) == roc_auc(scores, labels)

    def test_degenerate(self):
        with pytest.raises(DegenerateClassError):
            roc_auc([0.1, 0.2], [1, 1])

    def test_macro_skips(self):
        scores = np.array([[0.1, 0.5], [0.9, 0.4]])
        labels = np.array([[0, 1], [1, 1]])
        skipped = []
        assert macro_auc(scores, labels, names=("a", "b"), skipped=skipped) == 1.0
        assert skipped == ["b"]


def _bundle(logits, labels):
    n = logits.shape[0]
    return PredictionBundle(logits, torch.softmax(logits, 1), None, torch.rand(n, 15), labels.isop, labels.isoe,
                            labels.aq + 0.5)


class TestMetrics:
    def _labels(self, n=12):
        gen = torch.Generator().manual_seed(1)
        events = (torch.rand(n, 15, generator=gen) > 0.5).float()
        events[0] = 1
        events[1] = 0
        return LabelSet(torch.randint(0, 3, (n,), generator=gen), events,
                        torch.randint(1, 6, (n, 8), generator=gen).float())

    def test_accuracy_and_mse(self):
        labels = self._labels()
        logits = torch.nn.functional.one_hot(labels.scene, 3).float()
        logits[:3] = logits[:3].roll(1, dims=1)
        m = metrics_from_predictions(_bundle(logits, labels), labels)
        assert m["asc_accuracy"] == pytest.approx(9 / 12)
        assert m["mse_mean"] == pytest.approx(0.25)
        assert m["mse_per_target"]["isop"] == 0.0
        assert set(m["mse_per_target"]) == {"isop", "isoe", *vocab.AQ_NAMES}

    def test_accuracy_scale_invariance(self, rng):
        labels = self._labels()
        logits = torch.randn(12, 3)
        scale = torch.tensor(rng.uniform(0.1, 10, (12, 1)), dtype=torch.float32)
        a = metrics_from_predictions(_bundle(logits, labels), labels)["asc_accuracy"]
        b = metrics_from_predictions(_bundle(logits * scale, labels), labels)["asc_accuracy"]
        assert a == b


@pytest.fixture(scope="module")
def fixture_splits(fixture_manifest, fixture_cache):
    return (load_split(fixture_manifest.subset("train"), fixture_cache),
            load_split(fixture_manifest.subset("val"), fixture_cache))


class TestTraining:
    def test_empty_split(self, fixture_splits):
        with pytest.raises(EmptySplitError):
            load_split([], None)

    def test_cache_miss(self, fixture_manifest, tmp_path):
        from scapecap.features.cache import FeatureCache

        with pytest.raises(CacheMissError, match=fixture_manifest.records[0].clip_id):
            load_split(fixture_manifest.records[:1], FeatureCache(tmp_path))

    def test_deterministic_history(self, fixture_splits):
        tr, va = fixture_splits
        cfg = TrainConfig(batch_size=4, max_epochs=3, patience_start_epoch=3, seed=11)
        _, h1 = train(init_params(0, SMALL), tr, va, cfg)
        _, h2 = train(init_params(0, SMALL), tr, va, cfg)
        assert json.dumps(h1.to_dict(), sort_keys=True) == json.dumps(h2.to_dict(), sort_keys=True)

    def test_best_params_reproduce_val_loss(self, fixture_splits, tmp_path):
        tr, va = fixture_splits
        cfg = TrainConfig(batch_size=4, max_epochs=4, patience_start_epoch=4, seed=3, learning_rate=5e-3)
        model, hist = train(init_params(0, SMALL), tr, va, cfg, log_path=tmp_path / "log.jsonl",
                            checkpoint_dir=tmp_path / "ck")
        pred = predict(model, va)
        val = float(((pred.isop - va.labels.isop) ** 2).mean())
        assert val == hist.epochs[hist.best_epoch - 1].val_isop_loss
        assert hist.best_epoch == int(np.argmin(hist.val_isop)) + 1
        assert len((tmp_path / "log.jsonl").read_text().splitlines()) == len(hist.epochs)
        best, extra = load_checkpoint(tmp_path / "ck" / "best.pt")
        assert extra["epoch"] == hist.best_epoch
        assert (tmp_path / "ck" / "last.pt").exists()

    def test_loop_obeys_stopping_rule(self, fixture_splits):
        tr, va = fixture_splits
        cfg = TrainConfig(batch_size=8, max_epochs=40, patience=2, patience_start_epoch=2, seed=0,
                          learning_rate=5e-2)
        _, hist = train(init_params(0, SMALL), tr, va, cfg)
        fired = [e for e in range(1, len(hist.epochs) + 1) if early_stop_check(hist.val_isop, e, cfg)]
        if hist.stopped_early:
            assert fired == [len(hist.epochs)]
        else:
            assert not fired and len(hist.epochs) == 40

    def test_evaluate_metrics(self, fixture_splits):
        tr, _ = fixture_splits
        m = evaluate_metrics(init_params(0, SMALL), tr)
        assert 0.0 <= m["asc_accuracy"] <= 1.0
        assert 0.0 <= m["aec_auc_macro"] <= 1.0

    def test_config_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0)
        with pytest.raises(ValueError):
            TrainConfig(max_epochs=5, patience_start_epoch=10)
