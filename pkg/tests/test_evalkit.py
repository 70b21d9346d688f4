"""Tests for normalization, augmentation, focal loss, and multilabel metrics.

AP and AUROC are checked against hand-worked examples and against slow
O(n^2) reference implementations on random score tables; published
benchmark rows exercise the macro-averaging arithmetic.
"""

import numpy as np
import pytest

from terrapatch import (
    MetricReport,
    Sample,
    ScoreTable,
    augment,
    auroc,
    average_precision,
    delta_auc,
    evaluate,
    focal_loss,
    normalize,
    per_class_metrics,
)
from terrapatch.evalkit import AUGMENT_OPS, binary_confusion, write_delta_auc_csv


def make_sample(c=3, h=4, w=4, seed=0):
    rng = np.random.default_rng(seed)
    mods = ["imagery", "terrain", "terrain"][:c]
    return Sample(rng.normal(size=(c, h, w)), np.zeros(7, bool), mods)


class TestNormalize:
    def test_standardizes_per_modality(self):
        s = make_sample()
        stats = {"imagery": (1.0, 2.0), "terrain": (-3.0, 0.5)}
        out = normalize(s, stats)
        assert np.allclose(out.channels[0], (s.channels[0] - 1.0) / 2.0)
        assert np.allclose(out.channels[1], (s.channels[1] + 3.0) / 0.5)

    def test_zero_std_rejected(self):
        s = make_sample()
        with pytest.raises(ValueError):
            normalize(s, {"imagery": (0.0, 0.0), "terrain": (0.0, 1.0)})

    def test_modality_count_mismatch(self):
        s = make_sample()
        s.channel_modalities = s.channel_modalities[:-1]
        with pytest.raises(ValueError):
            normalize(s, {"imagery": (0, 1), "terrain": (0, 1)})


class TestAugment:
    def test_hflip_vflip(self):
        s = make_sample()
        assert np.array_equal(augment(s, "hflip").channels, s.channels[..., ::-1])
        assert np.array_equal(augment(s, "vflip").channels, s.channels[..., ::-1, :])

    def test_rotations_compose(self):
        s = make_sample()
        r90 = augment(s, "rot90")
        assert np.array_equal(
            augment(r90, "rot90").channels, augment(s, "rot180").channels
        )
        assert np.array_equal(
            augment(augment(s, "rot180"), "rot180").channels, s.channels
        )
        assert np.array_equal(
            augment(augment(s, "rot270"), "rot90").channels, s.channels
        )

    def test_all_ops_preserve_target_and_shape(self):
        s = make_sample()
        s.target = np.array([1, 0, 1, 0, 0, 0, 1], bool)
        for op in AUGMENT_OPS:
            out = augment(s, op)
            assert np.array_equal(out.target, s.target)
            assert out.channels.shape == s.channels.shape

    def test_channels_move_together(self):
        s = make_sample()
        out = augment(s, "rot90")
        for i in range(s.channels.shape[0]):
            assert np.array_equal(out.channels[i], np.rot90(s.channels[i]))

    def test_non_square_rotation_rejected(self):
        s = Sample(np.zeros((2, 3, 5)), np.zeros(7, bool), ["a", "a"])
        with pytest.raises(ValueError):
            augment(s, "rot90")
        assert augment(s, "hflip").channels.shape == (2, 3, 5)

    def test_unknown_op(self):
        with pytest.raises(ValueError):
            augment(make_sample(), "transpose")


class TestFocalLoss:
    def test_halfway_positive_default_params(self):
        # -0.25 * (0.5)^2 * ln(0.5) = 0.0625 * ln 2 / ... worked by hand:
        expected = 0.25 * 0.25 * np.log(2.0)
        got = focal_loss(np.full(7, 0.5), np.ones(7, bool))
        assert got == pytest.approx(expected, abs=1e-12)

    def test_reduces_to_weighted_bce_when_gamma_zero(self):
        rng = np.random.default_rng(1)
        p = rng.uniform(0.05, 0.95, (10, 7))
        y = rng.random((10, 7)) < 0.4
        got = focal_loss(p, y, alpha=0.5, gamma=0.0)
        bce = -(y * np.log(p) + ~y * np.log(1 - p))
        assert np.allclose(got, 0.5 * bce.mean(axis=-1), atol=1e-12)

    def test_halfway_bce_value(self):
        got = focal_loss(np.full(7, 0.5), np.ones(7, bool), alpha=0.5, gamma=0.0)
        assert got == pytest.approx(0.5 * np.log(2.0), abs=1e-12)

    def test_symmetric_at_alpha_half(self):
        p = np.array([0.7, 0.3])
        a = focal_loss(p, np.array([True, False]), alpha=0.5)
        b = focal_loss(1 - p, np.array([False, True]), alpha=0.5)
        assert a == pytest.approx(b, abs=1e-15)

    def test_monotone_in_confidence(self):
        ps = np.linspace(0.05, 0.95, 19)
        losses = [focal_loss(np.array([p]), np.array([True])) for p in ps]
        assert all(a > b for a, b in zip(losses, losses[1:]))

    def test_easy_negatives_downweighted(self):
        # gamma > 0 suppresses well-classified examples relative to BCE
        p = np.array([0.01])
        y = np.array([False])
        focal = focal_loss(p, y, alpha=0.25, gamma=2.0)
        bce = focal_loss(p, y, alpha=0.25, gamma=0.0)
        # modulation factor is (1 - p_t)^2 = 1e-4 here
        assert focal == pytest.approx(1e-4 * bce, rel=1e-12)

    def test_clamp_keeps_loss_finite(self):
        got = focal_loss(np.array([0.0, 1.0]), np.array([True, False]))
        assert np.isfinite(got)

    def test_batch_shape(self):
        out = focal_loss(np.full((5, 7), 0.5), np.zeros((5, 7), bool))
        assert out.shape == (5,)


def brute_ap(scores, targets):
    """Threshold-scan reference: precision at every distinct score level."""
    scores = np.asarray(scores, float)
    targets = np.asarray(targets, bool)
    n_pos = targets.sum()
    if n_pos == 0:
        return float("nan")
    ap = 0.0
    r_prev = 0.0
    for th in sorted(set(scores), reverse=True):
        sel = scores >= th
        tp = (targets & sel).sum()
        r = tp / n_pos
        p = tp / sel.sum()
        ap += (r - r_prev) * p
        r_prev = r
    return ap


def brute_auroc(scores, targets):
    """Pairwise comparison reference."""
    scores = np.asarray(scores, float)
    targets = np.asarray(targets, bool)
    pos = scores[targets]
    neg = scores[~targets]
    if len(pos) == 0 or len(neg) == 0:
        return float("nan")
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else (0.5 if p == q else 0.0)
    return wins / (len(pos) * len(neg))


class TestRankMetrics:
    def test_auroc_hand_example(self):
        s = np.array([0.9, 0.8, 0.7, 0.6])
        y = np.array([1, 0, 1, 0], bool)
        assert auroc(s, y) == pytest.approx(0.75, abs=1e-15)

    def test_ap_hand_example(self):
        s = np.array([0.9, 0.8, 0.7, 0.6])
        y = np.array([1, 0, 1, 0], bool)
        # P=1 at R=1/2, then P=2/3 at R=1
        assert average_precision(s, y) == pytest.approx(0.5 + 0.5 * 2 / 3, abs=1e-15)

    def test_perfect_ranking(self):
        s = np.array([0.9, 0.8, 0.2, 0.1])
        y = np.array([1, 1, 0, 0], bool)
        assert auroc(s, y) == 1.0
        assert average_precision(s, y) == 1.0

    def test_inverted_ranking(self):
        s = np.array([0.1, 0.2, 0.8, 0.9])
        y = np.array([1, 1, 0, 0], bool)
        assert auroc(s, y) == 0.0

    def test_all_tied_scores(self):
        s = np.full(10, 0.5)
        y = np.zeros(10, bool)
        y[:3] = True
        assert auroc(s, y) == pytest.approx(0.5, abs=1e-15)
        assert average_precision(s, y) == pytest.approx(0.3, abs=1e-15)

    def test_degenerate_targets_nan(self):
        s = np.array([0.1, 0.9])
        assert np.isnan(auroc(s, np.zeros(2, bool)))
        assert np.isnan(auroc(s, np.ones(2, bool)))
        assert np.isnan(average_precision(s, np.zeros(2, bool)))

    def test_random_tables_match_brute_force(self):
        rng = np.random.default_rng(2)
        for trial in range(1000):
            n = rng.integers(2, 30)
            # quantized scores force plenty of ties
            s = np.round(rng.random(n), 1)
            y = rng.random(n) < 0.4
            if 0 < y.sum() < n:
                assert auroc(s, y) == pytest.approx(brute_auroc(s, y), abs=1e-12)
            if y.sum() > 0:
                assert average_precision(s, y) == pytest.approx(brute_ap(s, y), abs=1e-12)

    def test_invariant_under_monotone_transform(self):
        rng = np.random.default_rng(3)
        s = rng.random(50)
        y = rng.random(50) < 0.3
        assert auroc(s, y) == pytest.approx(auroc(s**3, y), abs=1e-12)
        assert average_precision(s, y) == pytest.approx(
            average_precision(0.1 + 0.8 * s, y), abs=1e-12
        )


class TestThresholdMetrics:
    def table(self):
        # class 0: perfect; class 1: one fp, one fn
        scores = np.zeros((4, 7))
        targets = np.zeros((4, 7), bool)
        scores[:, 0] = [0.9, 0.8, 0.1, 0.2]
        targets[:, 0] = [1, 1, 0, 0]
        scores[:, 1] = [0.9, 0.3, 0.7, 0.1]
        targets[:, 1] = [1, 1, 0, 0]
        return ScoreTable(["a", "b", "c", "d"], scores, targets)

    def test_confusion(self):
        pred = np.array([1, 0, 1, 0], bool)
        target = np.array([1, 1, 0, 0], bool)
        assert binary_confusion(pred, target) == (1, 1, 1, 1)

    def test_per_class(self):
        acc, prec, rec, f1 = per_class_metrics(self.table())
        assert acc[0] == 1.0 and f1[0] == 1.0
        assert acc[1] == 0.5
        assert prec[1] == 0.5 and rec[1] == 0.5 and f1[1] == 0.5
        # classes 2..6 have no positives and no predictions
        assert np.all(acc[2:] == 1.0)
        assert np.all(f1[2:] == 0.0)

    def test_hamming_and_subset(self):
        report = evaluate(self.table())
        # 2 wrong cells out of 28
        assert report.hamming_loss == pytest.approx(2 / 28, abs=1e-15)
        # rows b and c each carry one error
        assert report.subset_accuracy == pytest.approx(0.5, abs=1e-15)

    def test_empty_table_rejected(self):
        t = ScoreTable([], np.zeros((0, 7)), np.zeros((0, 7), bool))
        with pytest.raises(ValueError):
            per_class_metrics(t)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            ScoreTable(["a"], np.zeros((1, 7)), np.zeros((2, 7), bool))

    def test_csv_round_trip(self, tmp_path):
        t = self.table()
        path = tmp_path / "scores.csv"
        t.write_csv(path)
        back = ScoreTable.read_csv(path)
        assert back.ids == t.ids
        assert np.array_equal(back.scores, t.scores)
        assert np.array_equal(back.targets, t.targets)


class TestBenchmarkRows:
    """Macro-averaging checks against published single-modality results."""

    IN_F1 = np.array([0.704, 0.788, 0.000, 0.331, 0.887, 0.770, 0.965])
    IN_ACC = np.array([0.787, 0.729, 0.992, 0.887, 0.886, 0.866, 0.934])
    CROSS_F1 = np.array([0.569, 0.686, 0.000, 0.092, 0.808, 0.679, 0.992])

    def report(self, f1, acc=None):
        z = np.zeros(7)
        return MetricReport(
            acc if acc is not None else z, z, z, f1, z, z, 0.0, 0.0
        )

    def test_in_domain_macro_f1(self):
        assert self.report(self.IN_F1).macro_f1 == pytest.approx(0.635, abs=5e-4)

    def test_in_domain_macro_accuracy(self):
        r = self.report(self.IN_F1, self.IN_ACC)
        assert r.macro(r.accuracy) == pytest.approx(0.869, abs=5e-4)

    def test_cross_domain_macro_f1(self):
        assert self.report(self.CROSS_F1).macro_f1 == pytest.approx(0.547, abs=5e-4)

    def test_domain_gap_direction(self):
        gap = self.report(self.IN_F1).macro_f1 - self.report(self.CROSS_F1).macro_f1
        assert gap == pytest.approx(0.635 - 0.547, abs=1e-3)


class TestDeltaAuc:
    IN_AUC = np.array([0.903, 0.955, 0.970, 0.927, 0.953, 0.962, 0.995])
    DELTA = np.array([0.055, 0.146, 0.384, 0.375, 0.012, 0.012, 0.220])

    def report(self, auc):
        z = np.zeros(7)
        return MetricReport(z, z, z, z, z, np.asarray(auc), 0.0, 0.0)

    def test_difference(self):
        got = delta_auc(self.report(self.IN_AUC), self.report(self.IN_AUC - self.DELTA))
        assert np.allclose(got, self.DELTA, atol=1e-12)

    def test_mismatched_shapes(self):
        a = self.report(self.IN_AUC)
        b = self.report(np.zeros(5))
        with pytest.raises(ValueError):
            delta_auc(a, b)

    def test_csv(self, tmp_path):
        path = tmp_path / "delta.csv"
        write_delta_auc_csv(path, {"dem": self.DELTA})
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "model,af1,Qal,Qaf,Qat,Qc,Qca,Qr"
        assert lines[1].startswith("dem,0.055000,0.146000")


def test_report_csv(tmp_path):
    z = np.linspace(0.1, 0.7, 7)
    r = MetricReport(z, z, z, z, z, z, 0.1, 0.5)
    path = tmp_path / "metrics.csv"
    r.write_csv(path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "metric,af1,Qal,Qaf,Qat,Qc,Qca,Qr,avg"
    assert len(lines) == 9


def test_macro_skips_nan():
    vals = np.array([0.5, np.nan, 1.0, np.nan, np.nan, np.nan, np.nan])
    r = MetricReport(*(np.zeros(7),) * 6, 0.0, 0.0)
    assert r.macro(vals) == pytest.approx(0.75)
    assert np.isnan(r.macro(np.full(7, np.nan)))
