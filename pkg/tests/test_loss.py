"""Policy-loss distribution L = X * Y."""

import numpy as np
import pytest
from scipy import integrate, signal, stats

from copulaloss.copulas import CopulaSpec, tau_to_theta
from copulaloss.joint import JointModel, joint_sample
from copulaloss.loss import (
    LossDistribution,
    loss_cdf,
    loss_curve_vs_tau,
    loss_mass,
    loss_mean,
    loss_pdf,
    loss_quantile,
    loss_skewness,
    loss_variance,
    mixture_weight,
    policy_moments,
)
from copulaloss.margins import GammaParams, ZtpParams, gamma_mean_var, gamma_pdf, ztp_mean_var, ztp_pmf

from conftest import DELTA, LAM, MU

INDEP_MEAN = MU * LAM / (1 - np.exp(-LAM))


def dist(cop):
    return LossDistribution(JointModel.from_params(MU, DELTA, LAM, cop))


@pytest.fixture(scope="module")
def indep():
    return dist(CopulaSpec.independence())


class TestDensity:
    def test_independence_compound_form(self, indep):
        l = np.linspace(50, 12000, 41)
        y = np.arange(1, indep.y_max + 1)
        ref = np.array([np.sum(ztp_pmf(y, indep.model.frequency) * gamma_pdf(t / y, indep.model.severity) / y)
                        for t in l])
        np.testing.assert_allclose(loss_pdf(l, indep), ref, rtol=1e-12)

    @pytest.mark.parametrize("fam", ["gauss", "clayton", "gumbel", "frank"])
    @pytest.mark.parametrize("tau", [0.1, 0.3, 0.5])
    def test_integrates_to_one(self, fam, tau):
        assert loss_mass(dist(tau_to_theta(tau, fam))) == pytest.approx(1.0, abs=1e-6)

    def test_clayton_multimodal(self):
        d = dist(tau_to_theta(0.5, "clayton"))
        l = np.linspace(1.0, 10000.0, 20000)
        peaks, _ = signal.find_peaks(loss_pdf(l, d))
        assert len(peaks) >= 2

    def test_nonnegative_and_continuous(self):
        d = dist(tau_to_theta(0.3, "gumbel"))
        l = np.linspace(1.0, 15000.0, 30001)
        f = loss_pdf(l, d)
        assert f.min() >= 0
        assert np.max(np.abs(np.diff(f))) < 2e-6

    def test_domain(self, indep):
        with pytest.raises(ValueError):
            loss_pdf(0.0, indep)
        with pytest.raises(ValueError):
            loss_pdf(np.array([1.0, -2.0]), indep)

    def test_truncation_bound(self, indep):
        from copulaloss.margins import ztp_sf
        assert ztp_sf(indep.y_max, indep.model.frequency) < 1e-12

    def test_scalar_parameters_required(self):
        with pytest.raises(ValueError):
            LossDistribution(JointModel.from_params(np.array([1.0, 2.0]), 0.1, 1.0))


class TestMixtureWeights:
    def test_independence_free_of_l(self, indep):
        y = np.arange(1, 10)
        for l in (200.0, 3000.0):
            np.testing.assert_allclose(mixture_weight(y, l, indep), ztp_pmf(y, indep.model.frequency) / y,
                                       rtol=1e-9, atol=1e-15)

    @pytest.mark.parametrize("fam", ["gauss", "clayton", "gumbel", "frank"])
    def test_reconstruction(self, fam):
        d = dist(tau_to_theta(0.4, fam))
        y = np.arange(1, d.y_max + 1)
        rng = np.random.default_rng(0)
        for l in rng.uniform(10, 15000, 20):
            w = mixture_weight(y, l, d)
            assert np.all(w <= 1.0 / y + 1e-15)
            assert np.sum(w * gamma_pdf(l / y, d.model.severity)) == pytest.approx(float(loss_pdf(l, d)), rel=1e-12)


class TestMoments:
    def test_independence_mean(self, indep):
        m = loss_mean(indep)
        assert m == pytest.approx(2723, abs=1)
        ex, _ = gamma_mean_var(indep.model.severity)
        ey, _ = ztp_mean_var(indep.model.frequency)
        assert m == pytest.approx(ex * ey, rel=1e-9)

    def test_independence_variance(self, indep):
        ey, vy = ztp_mean_var(indep.model.frequency)
        ref = MU**2 * (1 + DELTA) * (vy + ey**2) - (MU * ey) ** 2
        assert loss_variance(indep) == pytest.approx(ref, rel=1e-8)

    def test_clayton_mean_monte_carlo(self):
        d = dist(tau_to_theta(0.3, "clayton"))
        x, y = joint_sample(d.model, np.random.default_rng(31), 10**6)
        assert loss_mean(d) == pytest.approx(np.mean(x * y), rel=0.005)

    def test_gumbel_quartiles_monte_carlo(self):
        d = dist(tau_to_theta(0.3, "gumbel"))
        x, y = joint_sample(d.model, np.random.default_rng(32), 10**6)
        emp = np.quantile(x * y, [0.25, 0.75])
        assert loss_quantile(0.25, d) == pytest.approx(emp[0], rel=0.01)
        assert loss_quantile(0.75, d) == pytest.approx(emp[1], rel=0.01)

    def test_skewness_matches_monte_carlo(self):
        d = dist(tau_to_theta(0.3, "frank"))
        x, y = joint_sample(d.model, np.random.default_rng(33), 10**6)
        assert loss_skewness(d) == pytest.approx(stats.skew(x * y), abs=0.02)


class TestQuantiles:
    @pytest.mark.parametrize("fam", ["independence", "clayton", "gumbel"])
    def test_median_roundtrip(self, fam):
        d = dist(CopulaSpec.independence() if fam == "independence" else tau_to_theta(0.3, fam))
        q = loss_quantile(0.5, d)
        mass = integrate.quad(lambda t: float(loss_pdf(t, d)), 0, q, points=d.breakpoints[d.breakpoints < q],
                              limit=500, epsabs=0, epsrel=1e-10)[0]
        assert mass == pytest.approx(0.5, abs=1e-6)

    def test_cdf_equals_integrated_density(self):
        d = dist(tau_to_theta(0.4, "gauss"))
        for t in (500.0, 2000.0, 4500.0, 9000.0):
            pts = d.breakpoints[d.breakpoints < t]
            mass = integrate.quad(lambda s: float(loss_pdf(s, d)), 0, t, points=pts, limit=500,
                                  epsabs=0, epsrel=1e-11)[0]
            assert float(loss_cdf(t, d)) == pytest.approx(mass, abs=1e-9)

    def test_monotone_in_q(self):
        d = dist(tau_to_theta(0.3, "frank"))
        qs = [loss_quantile(q, d) for q in (0.05, 0.25, 0.5, 0.75, 0.95)]
        assert all(a < b for a, b in zip(qs, qs[1:]))

    @pytest.mark.parametrize("q", [0.0, 1.0, 1.2])
    def test_bad_level(self, indep, q):
        with pytest.raises(ValueError):
            loss_quantile(q, indep)


@pytest.fixture(scope="module")
def curves():
    sev, freq = GammaParams(MU, DELTA), ZtpParams(LAM)
    return {fam: loss_curve_vs_tau(sev, freq, fam, [-0.3, 0.0, 0.2, 0.5])
            for fam in ("gauss", "clayton", "gumbel", "frank")}


class TestTauCurve:
    def test_zero_is_independence(self, curves):
        for rows in curves.values():
            assert rows[1]["mean"] == pytest.approx(2723, abs=1)

    def test_increasing(self, curves):
        for rows in curves.values():
            m = [r["mean"] for r in rows]
            assert m[0] < m[1] < m[2] < m[3]

    def test_quartiles_ordered(self, curves):
        for rows in curves.values():
            for r in rows:
                assert r["q25"] < r["q75"]


class TestBatchedMoments:
    @pytest.mark.parametrize("cop", [tau_to_theta(0.3, "clayton"), tau_to_theta(-0.4, "gumbel"),
                                     tau_to_theta(0.6, "frank"), tau_to_theta(-0.5, "gauss"),
                                     CopulaSpec.independence()],
                             ids=["clayton", "gumbel-rot", "frank", "gauss", "indep"])
    @pytest.mark.parametrize("mu,delta,lam", [(1000.0, 0.09, 2.5), (0.05, 0.25, 0.4), (3.0, 1.0, 9.0)])
    def test_against_quadrature(self, cop, mu, delta, lam):
        d = LossDistribution(JointModel.from_params(mu, delta, lam, cop))
        m, v = policy_moments(mu, delta, lam, cop)
        ref_m = loss_mean(d)
        assert m[0] == pytest.approx(ref_m, rel=1e-8)
        assert v[0] == pytest.approx(loss_variance(d, ref_m), rel=1e-6)

    def test_vectorized(self):
        cop = tau_to_theta(0.3, "clayton")
        mu = np.array([0.2, 1.0, 5.0])
        lam = np.array([0.5, 2.0, 6.0])
        m, v = policy_moments(mu, 0.25, lam, cop)
        for i in range(3):
            mi, vi = policy_moments(mu[i], 0.25, lam[i], cop)
            # a vector shares the truncation point of its largest lam
            assert m[i] == pytest.approx(mi[0], rel=1e-10)
            assert v[i] == pytest.approx(vi[0], rel=1e-9)
