"""Acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line and the session summary lists them all.
Run on their own with ``pytest tests/test_acceptance.py -v``.
"""

import itertools
import shutil
import time

import numpy as np
import pytest
import torch
from scipy import stats as sps

from oracles import (auc_pairs, finite_difference_check, footprint_rfs, hand_ranks, paired_t_by_hand,
                     spearman_formula, wilcoxon_bruteforce)
from support import criterion, separable_scene_data, tiny_loss_problem

from scapecap import vocab
from scapecap.cli import run
from scapecap.features import loudness as zl
from scapecap.features.calibration import sine
from scapecap.features.pipeline import features_from_waveform
from scapecap.model.network import count_params, init_params
from scapecap.model.receptive_field import branch_layer_plan, receptive_field, receptive_field_trace
from scapecap.objectives import iso_eventfulness, iso_pleasantness, uncertainty_weighted_total
from scapecap.thumbs.scoring import THumBSRating, thumbs_score
from scapecap.thumbs.stats import paired_t, shapiro_wilk, spearman_rho, wilcoxon_signed_rank
from scapecap.train import TrainConfig, early_stop_check, load_split, roc_auc, train

mosqito = pytest.importorskip("mosqito.sq_metrics")

FS = 48000


def test_c01_receptive_field():
    with criterion(1, "receptive field sizes (pooled 76/144/212/280, no-pool 9/17/33/49/73/98)"):
        t0 = time.perf_counter()
        pooled = [receptive_field(k, branch_layer_plan()) for k in (3, 5, 7, 9)]
        assert pooled == [76, 144, 212, 280], pooled
        trace = receptive_field_trace(9, branch_layer_plan(pooling=False))
        assert time.perf_counter() - t0 < 1.0
        oracle = footprint_rfs(9, (1, 2, 3), pool=0)
        assert trace == [9, 17, 33, 49, 73, 98], f"computed {trace}, gradient-footprint oracle {oracle}"


def test_c02_iso_coordinates():
    with criterion(2, "ISOP/ISOE lattice bounds, boundaries and centre"):
        t0 = time.perf_counter()
        idx = vocab.AQ_INDEX
        for fn, names in ((iso_pleasantness, ("pleasant", "annoying", "calm", "chaotic", "vibrant", "monotonous")),
                          (iso_eventfulness, ("eventful", "uneventful", "chaotic", "calm", "vibrant", "monotonous"))):
            grid = np.array(list(itertools.product(range(1, 6), repeat=6)), dtype=float)
            r = np.full((grid.shape[0], 8), 3.0)
            for k, name in enumerate(names):
                r[:, idx[name]] = grid[:, k]
            v = fn(r)
            assert v.min() >= -1 - 1e-12 and v.max() <= 1 + 1e-12
            hi, lo = np.full(8, 3.0), np.full(8, 3.0)
            for k, name in enumerate(names):
                hi[idx[name]] = 5.0 if k % 2 == 0 else 1.0
                lo[idx[name]] = 1.0 if k % 2 == 0 else 5.0
            assert abs(fn(hi) - 1.0) <= 1e-12 and abs(fn(lo) + 1.0) <= 1e-12
            assert abs(fn(np.full(8, 3.0))) <= 1e-12
        assert time.perf_counter() - t0 < 10.0


def test_c03_loss_formula():
    with criterion(3, "uncertainty-weighted total: 7 at unit values, 0.9431 mixed case"):
        assert float(uncertainty_weighted_total(torch.ones(12), sigmas=torch.ones(12))) == 7.0
        losses = torch.zeros(12, dtype=torch.float64)
        sigmas = torch.ones(12, dtype=torch.float64)
        losses[5], sigmas[5] = 2.0, 2.0
        value = float(uncertainty_weighted_total(losses, sigmas=sigmas))
        assert abs(value - 0.9431) <= 1e-4, value


def test_c04_thumbs():
    with criterion(4, "caption score 3.425 for the reference row, extremes -5/+5"):
        s = thumbs_score(THumBSRating("r", "c", "expert", 3.84, 3.93, -0.10, -0.14, -0.22))
        assert abs(s - 3.425) <= 1e-12 and abs(s - 3.43) <= 0.01
        assert thumbs_score(THumBSRating("r", "c", "expert", 5, 5, 0, 0, 0)) == 5.0
        assert thumbs_score(THumBSRating("r", "c", "expert", 1, 1, -2, -2, -2)) == -5.0


def test_c05_features():
    with criterion(5, "feature shapes 3000x64 / 15000x1 and 40 dB tone at 1 sone"):
        x = np.random.default_rng(0).standard_normal(30 * FS) * 0.01
        pair = features_from_waveform("x", x, FS)
        assert pair.mel.values.shape == (3000, 64)
        assert abs(pair.loudness.values.shape[0] - 15000) <= 1 and pair.loudness.values.shape[1] == 1
        tone = sine(1000.0, 40.0, 2.0, FS)
        v = zl.zwicker_loudness(tone, FS).values[:, 0]
        ours = float(np.median(v[v.size // 2:]))
        ref = float(mosqito.loudness_zwst(tone, FS)[0])
        assert abs(ours - 1.0) <= 0.05, ours
        assert abs(ours - ref) <= 0.05 * ref, (ours, ref)


def test_c06_gradient_check():
    with criterion(6, "analytic vs central-difference gradients on 20 parameters"):
        t0 = time.perf_counter()
        model, loss = tiny_loss_problem(0)
        checks, _ = finite_difference_check(model, loss, n_samples=20, step=1e-4, seed=0)
        assert len(checks) >= 20
        worst = max(c[3] for c in checks)
        assert worst < 1e-3, worst
        assert time.perf_counter() - t0 < 60.0


def test_c07_optimisation(fixture_manifest, fixture_cache):
    with criterion(7, "fixture overfit >= 90% loss drop in 50 epochs, separable ASC >= 90%"):
        t0 = time.perf_counter()
        data = load_split(fixture_manifest.records, fixture_cache)
        cfg = TrainConfig(learning_rate=1e-3, batch_size=8, max_epochs=50, patience_start_epoch=50, seed=0)
        _, hist = train(init_params(0), data, data, cfg)
        first, last = hist.train_total[0], hist.train_total[-1]
        drop = (first - last) / abs(first)
        assert len(hist.epochs) <= 50
        assert drop >= 0.9, f"total loss {first:.3f} -> {last:.3f}"

        train_set = separable_scene_data(6, frames=280, seed=0)
        test_set = separable_scene_data(6, frames=280, seed=1)
        cfg = TrainConfig(learning_rate=1e-3, batch_size=6, max_epochs=8, patience_start_epoch=8, seed=0)
        _, hist = train(init_params(0), train_set, test_set, cfg)
        acc = hist.epochs[-1].metrics["asc_accuracy"]
        assert acc >= 0.9, f"held-out scene accuracy {acc:.3f}"
        assert time.perf_counter() - t0 < 300.0


def test_c08_early_stopping():
    with criterion(8, "early stopping from epoch 10 with a 10-epoch window"):
        cfg = TrainConfig()

        def first_stop(curve):
            return next((e for e in range(1, len(curve) + 1) if early_stop_check(curve, e, cfg)), None)

        assert first_stop(list(np.linspace(1, 0.1, 100))) is None
        assert first_stop([1.0] * 100) == 20
        assert first_stop([1.0 - 0.01 * e for e in range(1, 13)] + [0.88] * 30) == 22
        assert first_stop([1.0 - 0.01 * e for e in range(1, 13)] + [0.88] * 8 + [0.5] * 21) == 31
        rng = np.random.default_rng(0)
        for _ in range(300):
            curve = list(rng.choice([0.1, 0.2, 0.3, 0.4], size=rng.integers(1, 60)))
            for epoch in range(1, len(curve) + 1):
                best = curve[:epoch].index(min(curve[:epoch])) + 1
                assert early_stop_check(curve, epoch, cfg) == (epoch >= 10 and epoch - max(best, 10) >= 10)


def test_c09_statistics():
    with criterion(9, "Spearman, Wilcoxon, Shapiro-Wilk, paired t and AUC against oracles"):
        rng = np.random.default_rng(0)
        for _ in range(20):
            x, y = rng.normal(size=8), rng.normal(size=8)
            assert abs(spearman_rho(x, y)[0] - spearman_formula(x, y)) <= 1e-12
        assert spearman_rho(np.arange(1.0, 9), np.arange(1.0, 9) ** 2)[0] == 1.0

        a = [10.0, 12.0, 9.0, 14.0, 11.0, 13.0]
        b = [8.0, 13.0, 6.0, 10.0, 11.5, 8.0]
        d = np.subtract(a, b)
        ranks = np.asarray(hand_ranks(np.abs(d)))
        assert wilcoxon_signed_rank(a, b).statistic == float(ranks[d > 0].sum()) == 18.0
        for _ in range(30):
            a, b = rng.integers(0, 5, 9), rng.integers(0, 5, 9)
            if np.all(a == b):
                continue
            w, p = wilcoxon_bruteforce(a, b)
            r = wilcoxon_signed_rank(a, b)
            assert r.statistic == w and abs(r.p_value - p) <= 1e-12

        sample = rng.gamma(2.0, size=20)
        assert abs(shapiro_wilk(sample).statistic - sps.shapiro(sample).statistic) < 1e-4

        a, b = rng.normal(size=10), rng.normal(size=10)
        assert abs(paired_t(a, b).statistic - paired_t_by_hand(a, b)) <= 1e-12

        for n in range(2, 51):
            labels = rng.integers(0, 2, n)
            labels[0], labels[1] = 0, 1
            scores = np.round(rng.uniform(size=n), 1)
            assert roc_auc(scores, labels) == auc_pairs(scores, labels)


def test_c10_caption_determinism(tmp_path):
    with criterion(10, "stub caption pipeline gives byte-identical prompts and captions twice"):
        assert run(["make-fixture", str(tmp_path)]) == 0
        cfg = ["--config", str(tmp_path / "config.yaml"), "--seed", "0"]
        small = ["model.filters=[4, 4, 4]", "model.embed_dim=8", "model.edge_dim=8", "model.common_dim=16",
                 "model.head_hidden=8", "train.max_epochs=3", "train.patience_start_epoch=3"]
        args = cfg + sum((["--override", o] for o in small), [])
        outputs = []
        for _ in range(2):
            shutil.rmtree(tmp_path / "work", ignore_errors=True)
            for stage in ("pseudo-label", "split", "extract-features", "train", "predict", "caption"):
                assert run([stage, *args]) == 0, stage
            outputs.append({name: (tmp_path / "work" / name).read_bytes()
                            for name in ("prompts.jsonl", "captions.jsonl")})
        assert outputs[0]["prompts.jsonl"] and outputs[0]["captions.jsonl"]
        assert outputs[0] == outputs[1]


def test_c11_parameter_budget():
    with criterion(11, "default model within 2.70 M +/- 15% parameters"):
        n = count_params(init_params(0))
        assert abs(n - 2.70e6) <= 0.15 * 2.70e6, n
