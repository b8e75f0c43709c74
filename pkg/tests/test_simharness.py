"""Simulation study harness."""

import numpy as np
import pytest

from copulaloss.simharness import ConfigError, SimConfig, generate_design, rel_mse, run_study


class TestDesign:
    def test_columns(self):
        X = generate_design(10**5, np.random.default_rng(0))
        assert X.shape == (10**5, 5)
        assert np.all(X[:, 0] == 1.0)
        assert X[:, 1].mean() == pytest.approx(41.5, abs=0.3)
        assert X[:, 1].min() >= 18 and X[:, 1].max() <= 65
        assert X[:, 2].mean() == pytest.approx(0.5, abs=0.01)
        assert not np.any((X[:, 3] == 1) & (X[:, 4] == 1))
        assert X[:, 3].mean() == pytest.approx(1 / 3, abs=0.01)
        assert X[:, 4].mean() == pytest.approx(1 / 3, abs=0.01)

    def test_invalid(self):
        with pytest.raises(ValueError):
            generate_design(0, np.random.default_rng(0))


class TestRelMse:
    def test_values(self):
        assert rel_mse([1.0, 2.0], [1.0, 2.0]) == 0.0
        assert rel_mse([1.0, 2.0], [2.0, 2.0]) == 0.5

    def test_loop_oracle(self):
        rng = np.random.default_rng(1)
        g, gh = rng.normal(size=17), rng.normal(size=17)
        acc = 0.0
        for a, b in zip(g, gh):
            acc += ((a - b) / a) ** 2
        assert rel_mse(g, gh) == pytest.approx(acc / 17, rel=1e-15)

    def test_zero_truth(self):
        with pytest.raises(ZeroDivisionError):
            rel_mse([0.0, 1.0], [1.0, 1.0])


class TestConfig:
    def test_missing_family(self):
        with pytest.raises(ConfigError) as exc:
            SimConfig.from_dict({"n": 100})
        assert exc.value.field == "family"

    @pytest.mark.parametrize("raw,field", [
        ({"family": "clayton", "n": 0}, "n"),
        ({"family": "clayton", "R": 1}, "R"),
        ({"family": "clayton", "delta": -1}, "delta"),
        ({"family": "clayton", "tau_grid": [0.0]}, "tau_grid"),
        ({"family": "clayton", "alpha": [1, 2]}, "alpha"),
        ({"family": "joe"}, "family"),
        ({"family": "clayton", "colour": 1}, "colour"),
        ({"family": "clayton", "n": 2.5}, "n"),
    ])
    def test_field_named(self, raw, field):
        with pytest.raises(ConfigError) as exc:
            SimConfig.from_dict(raw)
        assert exc.value.field == field
        assert field in str(exc.value)

    def test_roundtrip(self):
        cfg = SimConfig.from_dict({"family": "gumbel", "R": 5, "seed": 3})
        assert SimConfig.from_dict(cfg.to_dict()) == cfg


@pytest.fixture(scope="module")
def small():
    return SimConfig("frank", n=200, R=3, tau_grid=(0.3, -0.3), seed=11)


@pytest.fixture(scope="module")
def small_result(small):
    return run_study(small)


class TestStudy:
    def test_deterministic(self, small, small_result):
        b = run_study(small)
        assert small_result.replicates == b.replicates
        assert small_result.summary == b.summary

    def test_structure(self, small_result):
        res = small_result
        assert len(res.replicates) == 2 * 3 * 2 * 6
        assert all(r["se"] >= 0 for r in res.summary if r["n_ok"] > 1)
        assert res.summary_value(-0.3, "independence", "tau") == 0.0
        assert res.summary_value(-0.3, "joint", "tau") < 0
        assert res.failures == {0.3: 0, -0.3: 0}

    def test_workers_do_not_change_results(self, small, small_result):
        b = run_study(small, workers=2)
        assert small_result.replicates == b.replicates

    def test_standard_error_formula(self, small_result):
        res = small_result
        vals = np.array([r["value"] for r in res.replicates
                         if r["tau"] == 0.3 and r["method"] == "joint" and r["metric"] == "aic"])
        se = np.sqrt(np.sum((vals - vals.mean()) ** 2) / (vals.size * (vals.size - 1)))
        assert res.summary_value(0.3, "joint", "aic", "se") == pytest.approx(se, rel=1e-12)
