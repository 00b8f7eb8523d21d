"""Metric oracles: ratios by hand, p-values against the scipy t-distribution."""

import math

import numpy as np
import pytest
from scipy import special, stats

from lusbline.metrics import (
    ConfusionCounts,
    paired_t_test,
    precision_recall,
    f1_score,
    regularized_incomplete_beta,
    student_t_two_sided_p,
    temporal_iou,
)


class TestPrecisionRecall:
    def test_perfect(self):
        p, r, flag = precision_recall(ConfusionCounts(tp=10, fp=0, tn=0, fn=0))
        assert (p, r, flag) == (1.0, 1.0, False)

    def test_all_wrong_flagged(self):
        p, r, flag = precision_recall(ConfusionCounts(tp=0, fp=5, tn=0, fn=5))
        assert (p, r) == (0.0, 0.0)
        assert not flag  # denominators are non-zero here

    def test_zero_denominators_flagged(self):
        p, r, flag = precision_recall(ConfusionCounts(tp=0, fp=0, tn=5, fn=0))
        assert (p, r, flag) == (0.0, 0.0, True)

    def test_direct_ratios(self):
        p, r, _ = precision_recall(ConfusionCounts(tp=8, fp=2, tn=0, fn=4))
        assert p == pytest.approx(0.8)
        assert r == pytest.approx(0.6667, abs=1e-4)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError):
            ConfusionCounts(tp=-1, fp=0, tn=0, fn=0)

    def test_add_routing(self):
        c = ConfusionCounts()
        c.add(True, True)
        c.add(True, False)
        c.add(False, True)
        c.add(False, False)
        assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)
        assert c.total == 4


class TestF1:
    def test_equal_halves(self):
        assert f1_score(0.5, 0.5) == pytest.approx(50.0)

    def test_zero_annihilates(self):
        assert f1_score(1.0, 0.0) == 0.0
        assert f1_score(0.0, 0.0) == 0.0

    def test_direct_formula(self):
        assert f1_score(0.8, 0.9) == pytest.approx(84.71, abs=0.01)

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            p, r = rng.random(2)
            f = f1_score(p, r)
            assert f == pytest.approx(f1_score(r, p))
            assert 0.0 <= f <= 100.0

    def test_diagonal_identity(self):
        for p in np.linspace(0, 1, 11):
            assert f1_score(p, p) == pytest.approx(100.0 * p)

    def test_hundred_iff_perfect(self):
        assert f1_score(1.0, 1.0) == 100.0
        assert f1_score(1.0, 0.999) < 100.0

    def test_range_check(self):
        with pytest.raises(ValueError):
            f1_score(1.2, 0.5)


class TestTemporalIoU:
    def test_identical_sets(self):
        assert temporal_iou({1, 2, 3}, {1, 2, 3}) == 1.0

    def test_disjoint_sets(self):
        assert temporal_iou({0, 1}, {2, 3}) == 0.0

    def test_partial_overlap(self):
        assert temporal_iou({1, 2, 3, 4}, {3, 4, 5, 6}) == pytest.approx(2 / 6)

    def test_empty_conventions(self):
        assert temporal_iou(set(), set()) == 1.0
        assert temporal_iou(set(), {1}) == 0.0
        assert temporal_iou({1}, set()) == 0.0

    def test_symmetry_and_bounds(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            a = set(rng.integers(0, 16, rng.integers(0, 8)).tolist())
            b = set(rng.integers(0, 16, rng.integers(0, 8)).tolist())
            v = temporal_iou(a, b)
            assert v == temporal_iou(b, a)
            assert 0.0 <= v <= 1.0
            assert (v == 1.0) == (a == b)


class TestIncompleteBeta:
    def test_against_scipy_grid(self):
        for a in (0.5, 1.0, 2.0, 2.5, 7.0, 30.0):
            for b in (0.5, 1.0, 3.0, 12.5):
                for x in (0.0, 1e-6, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0 - 1e-6, 1.0):
                    got = regularized_incomplete_beta(a, b, x)
                    want = float(special.betainc(a, b, x))
                    assert abs(got - want) < 1e-10

    def test_invalid_shapes(self):
        with pytest.raises(ValueError):
            regularized_incomplete_beta(0.0, 1.0, 0.5)


class TestPairedT:
    def test_closed_form_stat(self):
        res = paired_t_test([2.0, 3.0, 4.0], [1.0, 1.0, 1.0])
        assert res.t_statistic == pytest.approx(2.0 * math.sqrt(3), abs=1e-4)  # 3.4641
        assert res.degrees_of_freedom == 2
        assert res.mean_difference == pytest.approx(2.0)

    def test_p_value_against_t_cdf_oracle(self):
        res = paired_t_test([2.0, 3.0, 4.0], [1.0, 1.0, 1.0])
        assert res.p_value_two_sided == pytest.approx(0.0742, abs=1e-3)
        oracle = 2.0 * float(stats.t.sf(abs(res.t_statistic), res.degrees_of_freedom))
        assert res.p_value_two_sided == pytest.approx(oracle, abs=1e-10)

    def test_antisymmetry(self):
        rng = np.random.default_rng(8)
        xs, ys = rng.random(6), rng.random(6)
        a = paired_t_test(xs, ys)
        b = paired_t_test(ys, xs)
        assert a.t_statistic == pytest.approx(-b.t_statistic)
        assert a.p_value_two_sided == pytest.approx(b.p_value_two_sided)

    def test_shift_invariance(self):
        rng = np.random.default_rng(9)
        xs, ys = rng.random(5), rng.random(5)
        a = paired_t_test(xs, ys)
        b = paired_t_test(xs + 10.0, ys + 10.0)
        assert a.t_statistic == pytest.approx(b.t_statistic)
        assert a.p_value_two_sided == pytest.approx(b.p_value_two_sided)

    def test_p_monotone_in_t(self):
        for df in (1, 2, 4, 9, 30):
            ts = np.linspace(0.1, 6.0, 40)
            ps = [student_t_two_sided_p(t, df) for t in ts]
            assert all(ps[i + 1] < ps[i] for i in range(len(ps) - 1))
            for t, p in zip(ts, ps):
                oracle = 2.0 * float(stats.t.sf(t, df))
                assert p == pytest.approx(oracle, abs=1e-10)

    def test_degenerate_inputs(self):
        with pytest.raises(ValueError):
            paired_t_test([1.0], [0.0])
        with pytest.raises(ValueError):
            paired_t_test([1.0, 2.0], [0.0, 1.0])  # constant differences
        with pytest.raises(ValueError):
            paired_t_test([1.0, 2.0], [0.0, 1.0, 2.0])
