"""Vuong test and AIC."""

import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy import stats

from copulaloss.regression import fit_independence, fit_mle
from copulaloss.selection import DegenerateVarianceError, aic, aic_ranking, pairwise_vuong, vuong_test

from conftest import simulate_dataset


class TestVuong:
    def test_identical_inputs(self):
        l = np.random.default_rng(0).normal(size=50)
        with pytest.raises(DegenerateVarianceError):
            vuong_test(l, l)

    def test_constant_difference(self):
        l = np.random.default_rng(0).normal(size=50)
        with pytest.raises(DegenerateVarianceError):
            vuong_test(l + 0.3, l)

    def test_input_validation(self):
        with pytest.raises(ValueError):
            vuong_test([1.0], [2.0])
        with pytest.raises(ValueError):
            vuong_test([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_statistic_formula(self):
        rng = np.random.default_rng(1)
        l1, l2 = rng.normal(size=200), rng.normal(size=200)
        m = l1 - l2
        ref = math.sqrt(m.size) * m.mean() / math.sqrt(np.mean((m - m.mean()) ** 2))
        assert vuong_test(l1, l2).statistic == pytest.approx(ref, rel=1e-13)

    def test_null_size(self):
        rng = np.random.default_rng(2)
        reps = 1000
        rejections = 0
        for _ in range(reps):
            m = rng.normal(size=10**4)
            r = vuong_test(m, np.zeros_like(m))
            rejections += abs(r.statistic) >= 1.96
        assert rejections / reps == pytest.approx(0.05, abs=0.015)

    def test_antisymmetric(self):
        rng = np.random.default_rng(3)
        l1, l2 = rng.normal(size=300), rng.normal(0.1, 1.0, size=300)
        assert vuong_test(l1, l2).statistic == -vuong_test(l2, l1).statistic

    def test_shift_invariant(self):
        rng = np.random.default_rng(4)
        l1, l2 = rng.normal(size=300), rng.normal(size=300)
        assert vuong_test(l1 + 7.25, l2 + 7.25).statistic == pytest.approx(vuong_test(l1, l2).statistic, rel=1e-12)

    def test_thresholds(self):
        assert stats.norm.ppf(0.975) == pytest.approx(1.959964, abs=5e-7)
        rng = np.random.default_rng(5)
        base = rng.normal(size=400)
        sd = 1.0

        def with_stat(t):
            m = base - base.mean()
            m = m / np.sqrt(np.mean(m**2)) * sd + t * sd / math.sqrt(m.size)
            return vuong_test(m, np.zeros_like(m))

        assert with_stat(1.97).preferred == "model1"
        assert with_stat(1.95).preferred == "undecided"
        assert with_stat(-1.97).preferred == "model2"
        assert with_stat(-1.95).preferred == "undecided"

    def test_dof_correction(self):
        rng = np.random.default_rng(6)
        l1, l2 = rng.normal(size=500), rng.normal(size=500)
        plain = vuong_test(l1, l2)
        corr = vuong_test(l1, l2, dof1=12, dof2=11)
        assert corr.mean_diff == pytest.approx(plain.mean_diff - math.log(500) / 1000, rel=1e-12)
        assert vuong_test(l1, l2, dof1=12, dof2=12).statistic == plain.statistic


class TestAic:
    def test_formula(self):
        assert aic(SimpleNamespace(loglik=0.0, dof=11)) == 22.0

    def test_joint_versus_independence_difference(self):
        d = simulate_dataset(500, "clayton", 0.3, seed=501)
        j = fit_mle(d, "clayton")
        i = fit_independence(d)
        assert aic(j) - aic(i) == pytest.approx(-2 * (j.loglik - i.loglik) + 2, rel=1e-12)

    def test_joint_preferred_on_dependent_data(self):
        wins = 0
        for r in range(20):
            d = simulate_dataset(500, "clayton", 0.3, seed=600 + r)
            wins += aic(fit_mle(d, "clayton")) < aic(fit_independence(d))
        assert wins >= 18


class TestTables:
    def test_pairwise_and_ranking(self):
        d = simulate_dataset(800, "clayton", 0.3, seed=701)
        fits = [fit_mle(d, f) for f in ("clayton", "frank")] + [fit_independence(d)]
        table = pairwise_vuong(fits)
        assert [(r["model1"], r["model2"]) for r in table] == [
            ("clayton", "frank"), ("clayton", "independence"), ("frank", "independence")]
        assert table[1]["preferred"] == "clayton"
        rank = aic_ranking(fits)
        assert [r["rank"] for r in rank] == [1, 2, 3]
        assert rank[0]["aic"] <= rank[1]["aic"] <= rank[2]["aic"]
        assert rank[-1]["family"] == "independence"

    def test_duplicate_family_reported_as_degenerate(self):
        d = simulate_dataset(300, "clayton", 0.3, seed=702)
        f = fit_mle(d, "clayton")
        (row,) = pairwise_vuong([f, f])
        assert row["preferred"] == "degenerate" and math.isnan(row["statistic"])
