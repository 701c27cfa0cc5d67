import numpy as np
import pytest

from aqaparse.data import TransitionSet, transition_bins
from aqaparse.errors import MetricError
from aqaparse.metrics import (
    MetricConfig,
    MetricReport,
    aiou_at,
    f_measure,
    mask_mae,
    relative_l2,
    s_measure,
    spearman_rho,
    video_s_measure,
)

from .oracles import (
    oracle_aiou,
    oracle_f_measure,
    oracle_mae,
    oracle_relative_l2,
    oracle_s_measure,
    oracle_spearman,
)


def random_transition_set(rng, total_frames, num_transitions):
    ts = []
    for k, (lo, hi) in enumerate(transition_bins(total_frames, num_transitions)):
        if k == num_transitions - 1:
            hi -= 1
        ts.append(int(rng.integers(lo + 1, hi + 1)))
    return TransitionSet(tuple(ts), total_frames)


class TestSpearman:
    def test_perfect_agreement(self):
        assert spearman_rho([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)

    def test_perfect_disagreement(self):
        assert spearman_rho([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_rank_formula_example(self):
        # d^2 = 4+1+1 -> 1 - 6*6/(3*8) = -0.5
        assert spearman_rho([1, 2, 3], [3, 1, 2]) == pytest.approx(-0.5)

    def test_constant_input_raises(self):
        with pytest.raises(MetricError, match="constant"):
            spearman_rho([1.0, 1.0, 1.0], [1, 2, 3])

    def test_monotone_transform_invariance(self, rng):
        for _ in range(50):
            p = rng.normal(size=12)
            g = rng.normal(size=12)
            base = spearman_rho(p, g)
            assert spearman_rho(np.exp(2 * p) + 5, g) == pytest.approx(base, abs=1e-12)

    def test_ties_average_ranks_vs_scipy(self, rng):
        scipy_stats = pytest.importorskip("scipy.stats")
        for _ in range(100):
            n = int(rng.integers(3, 9))
            p = rng.integers(0, 4, size=n).astype(float)
            g = rng.integers(0, 4, size=n).astype(float)
            if len(set(p)) < 2 or len(set(g)) < 2:
                continue
            expected = scipy_stats.spearmanr(p, g).statistic
            assert spearman_rho(p, g) == pytest.approx(expected, abs=1e-12)


class TestRelativeL2:
    def test_zero_error(self):
        assert relative_l2([1, 2], [1, 2], 0, 100) == 0.0

    def test_single_formula(self):
        assert relative_l2([60.0], [50.0], 0.0, 100.0) == pytest.approx(1.0)

    def test_quadratic_scaling(self, rng):
        g = rng.uniform(0, 100, size=10)
        e = rng.normal(size=10)
        one = relative_l2(g + e, g, 0, 100)
        two = relative_l2(g + 2 * e, g, 0, 100)
        assert two == pytest.approx(4 * one, rel=1e-12)


class TestAiou:
    def test_perfect(self, rng):
        sets = [random_transition_set(rng, 96, 2) for _ in range(10)]
        for d in (0.25, 0.5, 0.75, 1.0):
            assert aiou_at(sets, sets, d) == 1.0

    def test_disjoint_intervals_zero(self):
        # maximally shifted transitions give IoU < 0.6 on every step
        pred = [TransitionSet((1, 49), 96)]
        gt = [TransitionSet((48, 95), 96)]
        assert aiou_at(pred, gt, 0.75) == 0.0

    def test_enumerated_small_instance(self):
        # T=10, L'=2: bins (0,5], (5,10]; hand-checked IoU
        pred = [TransitionSet((3, 7), 10)]
        gt = [TransitionSet((4, 8), 10)]
        # steps pred (0,3](3,7](7,10], gt (0,4](4,8](8,10]
        # IoU: 3/4, 3/5, 2/3 -> mean 0.6722
        assert aiou_at(pred, gt, 0.67) == 1.0
        assert aiou_at(pred, gt, 0.68) == 0.0


class TestMaskMetrics:
    def test_mae_identity_and_inversion(self, rng):
        gt = (rng.random((4, 4)) < 0.5).astype(float)
        assert mask_mae(gt, gt) == 0.0
        assert mask_mae(1 - gt, gt) == 1.0

    def test_f_perfect_and_zero(self):
        gt = np.array([[1, 0], [1, 1]])
        assert f_measure(gt, gt) == pytest.approx(1.0)
        assert f_measure(np.zeros_like(gt), gt) == 0.0

    def test_f_formula_example(self):
        # P=0.5, R=1, beta2=0.3 -> 1.3*0.5/(0.15+1)
        gt = np.array([[1, 1, 0, 0]])
        pred = np.array([[1, 1, 1, 1]])
        assert f_measure(pred, gt, 0.3) == pytest.approx(1.3 * 0.5 / 1.15)

    def test_s_perfect(self, rng):
        for _ in range(20):
            gt = (rng.random((6, 6)) < rng.uniform(0.2, 0.8)).astype(float)
            if gt.mean() in (0.0, 1.0):
                continue
            assert s_measure(gt, gt) == pytest.approx(1.0, abs=1e-6)

    def test_s_inverted_below_half(self, rng):
        for _ in range(20):
            gt = (rng.random((6, 6)) < 0.5).astype(float)
            if gt.mean() in (0.0, 1.0):
                continue
            assert s_measure(1.0 - gt, gt) < 0.5

    def test_s_alpha_one_is_object_term(self, rng):
        gt = (rng.random((6, 6)) < 0.5).astype(float)
        pred = rng.random((6, 6))
        s_obj = s_measure(pred, gt, alpha=1.0)
        mixed = s_measure(pred, gt, alpha=0.5)
        region = 2 * mixed - s_obj  # invert the convex combination
        assert s_measure(pred, gt, alpha=0.0) == pytest.approx(region, abs=1e-9)

    def test_s_empty_and_full_gt(self):
        pred = np.full((4, 4), 0.25)
        assert s_measure(pred, np.zeros((4, 4))) == pytest.approx(0.75)
        assert s_measure(pred, np.ones((4, 4))) == pytest.approx(0.25)

    def test_video_s_measure_is_frame_mean(self, rng):
        gt = (rng.random((3, 5, 5)) < 0.5).astype(float)
        pred = rng.random((3, 5, 5))
        expected = np.mean([s_measure(p, g) for p, g in zip(pred, gt)])
        assert video_s_measure(pred, gt) == pytest.approx(expected)


class TestOracleAgreement:
    """Vectorized implementations vs loop-based brute force on small instances."""

    def test_spearman(self, rng):
        for _ in range(300):
            n = int(rng.integers(2, 9))
            p = rng.integers(0, 5, size=n).astype(float)
            g = rng.integers(0, 5, size=n).astype(float)
            if len(set(p)) < 2 or len(set(g)) < 2:
                continue
            assert spearman_rho(p, g) == pytest.approx(oracle_spearman(p, g), abs=1e-9)

    def test_relative_l2(self, rng):
        for _ in range(300):
            n = int(rng.integers(1, 9))
            p = rng.uniform(0, 100, size=n)
            g = rng.uniform(0, 100, size=n)
            assert relative_l2(p, g, 0, 100) == pytest.approx(
                oracle_relative_l2(p, g, 0, 100), abs=1e-9
            )

    def test_aiou(self, rng):
        for _ in range(200):
            t = int(rng.integers(4, 9))
            n = int(rng.integers(1, 5))
            preds = [random_transition_set(rng, t, 2) for _ in range(n)]
            gts = [random_transition_set(rng, t, 2) for _ in range(n)]
            d = float(rng.uniform(0.1, 1.0))
            expected = oracle_aiou(
                [p.timestamps for p in preds], [g.timestamps for g in gts], t, d
            )
            assert aiou_at(preds, gts, d) == pytest.approx(expected, abs=1e-9)

    def test_mask_metrics(self, rng):
        for _ in range(200):
            h, w = int(rng.integers(2, 9)), int(rng.integers(2, 9))
            gt = (rng.random((h, w)) < rng.uniform(0.1, 0.9)).astype(float)
            pred = rng.random((h, w))
            hard = (pred > 0.5).astype(float)
            assert mask_mae(pred, gt) == pytest.approx(oracle_mae(pred, gt), abs=1e-9)
            assert f_measure(hard, gt, 0.3) == pytest.approx(
                oracle_f_measure(hard, gt, 0.3), abs=1e-9
            )
            assert s_measure(pred, gt, 0.5) == pytest.approx(
                oracle_s_measure(pred.tolist(), gt.tolist(), 0.5), abs=1e-9
            )


def test_report_serialization():
    report = MetricReport(0.9, 0.5, {0.5: 1.0, 0.75: 0.8}, 0.05, 0.7, 0.85)
    data = report.to_dict()
    assert set(data) == {"rho", "r_l2_x100", "aiou", "mae", "f_beta", "s_measure"}
    assert data["aiou"] == {"0.5": 1.0, "0.75": 0.8}


def test_metric_config_validation():
    with pytest.raises(Exception):
        MetricConfig(beta2=0.0)
    with pytest.raises(Exception):
        MetricConfig(alpha=1.5)
    with pytest.raises(Exception):
        MetricConfig(score_range=(10.0, 10.0))
