"""Command-line interface."""

import csv
import dataclasses
import json
import re
import subprocess
import sys

import numpy as np
import pytest

from copulaloss import cli
from copulaloss.copulas import FAMILIES


def run(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def portfolio(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "portfolio.csv"
    assert cli.main(["sample-data", "--n", "400", "--family", "clayton", "--tau", "0.3",
                     "--seed", "5", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def clayton_model(portfolio, tmp_path_factory):
    path = tmp_path_factory.mktemp("model") / "clayton.json"
    assert cli.main(["fit", str(portfolio), "--family", "clayton", "--out", str(path)]) == 0
    return path


class TestExitCodes:
    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(["fit", tmp_path / "none.csv"], capsys)
        assert code == 1 and "error" in err

    def test_bad_row(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("avg_claim_size,n_claims\n10,1\n-1,2\n")
        code, _, err = run(["fit", p], capsys)
        assert code == 1 and "line 3" in err

    def test_rotated_gauss(self, portfolio, capsys):
        code, _, err = run(["fit", portfolio, "--family", "gauss", "--rotated"], capsys)
        assert code == 1 and "rotated" in err

    def test_non_convergence(self, portfolio, capsys, monkeypatch):
        real = cli.fit_mle
        monkeypatch.setattr(cli, "fit_mle",
                            lambda *a, **k: dataclasses.replace(real(*a, **k), converged=False, message="forced"))
        code, _, err = run(["fit", portfolio, "--family", "frank"], capsys)
        assert code == 2 and "converge" in err

    def test_version(self):
        out = subprocess.run([sys.executable, "-m", "copulaloss", "--version"], capture_output=True, text=True)
        assert out.returncode == 0 and out.stdout.startswith("copulaloss ")


class TestFit:
    def test_independence_report(self, portfolio, capsys):
        code, out, _ = run(["fit", portfolio, "--family", "independence"], capsys)
        assert code == 0
        assert "dof: 11" in out
        assert "kendall tau" not in out
        assert "theta" not in out

    def test_copula_report_and_csv(self, portfolio, tmp_path, capsys):
        table = tmp_path / "coef.csv"
        code, out, _ = run(["fit", portfolio, "--family", "clayton", "--csv", table], capsys)
        assert code == 0
        assert "dof: 12" in out
        tau = float(re.search(r"kendall tau: (\S+)", out).group(1))
        assert 0.15 < tau < 0.45
        rows = read_rows(table)
        assert [r["parameter"] for r in rows][-2:] == ["theta", "delta"]
        for r in rows:
            assert float(r["ci_low"]) < float(r["estimate"]) < float(r["ci_high"])

    def test_ifm_close_to_mle(self, tmp_path, capsys):
        data = tmp_path / "big.csv"
        assert cli.main(["sample-data", "--n", "2000", "--family", "gumbel", "--tau", "0.3",
                         "--seed", "8", "--out", str(data)]) == 0
        taus = {}
        for method in ("mle", "ifm"):
            code, out, _ = run(["fit", data, "--family", "gumbel", "--method", method], capsys)
            assert code == 0
            taus[method] = float(re.search(r"kendall tau: (\S+)", out).group(1))
        assert abs(taus["mle"] - taus["ifm"]) < 0.03


class TestLoss:
    def test_density_integrates_to_one(self, tmp_path, capsys):
        out_csv = tmp_path / "dens.csv"
        code, out, _ = run(["loss", "--l-max", 60000, "--grid-points", 20000, "--out", out_csv], capsys)
        assert code == 0
        mean = float(re.search(r"mean: (\S+)", out).group(1))
        assert mean == pytest.approx(2723, abs=1)
        rows = read_rows(out_csv)
        l = np.array([0.0] + [float(r["l"]) for r in rows])
        f = np.array([0.0] + [float(r["density"]) for r in rows])
        assert np.trapezoid(f, l) == pytest.approx(1.0, abs=1e-3)

    def test_needs_dependence_parameter(self, capsys):
        code, _, err = run(["loss", "--family", "frank"], capsys)
        assert code == 1 and "--tau" in err

    def test_tau_sweep(self, tmp_path, capsys):
        out_csv = tmp_path / "sweep.csv"
        code, _, _ = run(["loss", "--tau-sweep", "--tau-grid=-0.2,0,0.2", "--out", out_csv], capsys)
        assert code == 0
        rows = read_rows(out_csv)
        assert {r["family"] for r in rows} == {f.value for f in FAMILIES}
        assert len(rows) == 3 * len(FAMILIES)
        for r in rows:
            if float(r["tau"]) == 0.0:
                assert float(r["mean"]) == pytest.approx(2723.56, abs=0.01)
            assert float(r["q25"]) < float(r["q75"])

    def test_from_model_row(self, portfolio, clayton_model, capsys):
        code, out, _ = run(["loss", "--model", clayton_model, "--data", portfolio, "--row", 3], capsys)
        assert code == 0 and "copula: clayton" in out
        code, _, err = run(["loss", "--model", clayton_model, "--data", portfolio, "--row", 400], capsys)
        assert code == 1 and "--row" in err


class TestSimulate:
    def _config(self, tmp_path, **extra):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"family": "clayton", "n": 150, "R": 2, "tau_grid": [0.3], **extra}))
        return p

    def test_reproducible(self, tmp_path, capsys):
        cfg = self._config(tmp_path)
        for name in ("a", "b"):
            assert run(["simulate", cfg, "--out", tmp_path / name, "--seed", 7], capsys)[0] == 0
        for f in ("replicates.csv", "summary.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        rows = read_rows(tmp_path / "a" / "summary.csv")
        assert {r["method"] for r in rows} == {"independence", "joint"}

    def test_missing_family(self, tmp_path, capsys):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"n": 100}))
        code, _, err = run(["simulate", p, "--out", tmp_path / "o"], capsys)
        assert code == 1 and "family" in err

    def test_invalid_json(self, tmp_path, capsys):
        p = tmp_path / "cfg.json"
        p.write_text("{\n  \"family\": ,\n}")
        code, _, err = run(["simulate", p], capsys)
        assert code == 1 and "line 2" in err


class TestTotalLoss:
    def test_independence_underestimates(self, portfolio, clayton_model, tmp_path, capsys):
        out_csv = tmp_path / "tot.csv"
        code, out, _ = run(["total-loss", portfolio, "--model", clayton_model, "--out", out_csv], capsys)
        assert code == 0
        ratio = float(re.search(r"ratio independence/clayton: (\S+)", out).group(1))
        assert ratio < 1
        rows = read_rows(out_csv)
        assert [r["model"] for r in rows] == ["clayton", "independence-refit"]
        assert float(rows[0]["q0.5"]) == float(rows[0]["mean"])

    def test_single_row_equals_policy_mean(self, portfolio, clayton_model, tmp_path, capsys):
        lines = portfolio.read_text().splitlines()
        one = tmp_path / "one.csv"
        one.write_text("\n".join(lines[:2]) + "\n")
        out_csv = tmp_path / "tot.csv"
        code, _, _ = run(["total-loss", one, "--model", clayton_model, "--out", out_csv], capsys)
        assert code == 0
        total = float(read_rows(out_csv)[0]["mean"])
        code, out, _ = run(["loss", "--model", clayton_model, "--data", portfolio, "--row", 0], capsys)
        policy = float(re.search(r"mean: (\S+)", out).group(1))
        assert total == pytest.approx(policy, rel=1e-8)


class TestSelect:
    def test_tables(self, portfolio, tmp_path, capsys):
        pair, rank = tmp_path / "pair.csv", tmp_path / "aic.csv"
        code, out, _ = run(["select", portfolio, "--families", "clayton", "frank", "independence",
                            "--out", pair, "--aic-out", rank], capsys)
        assert code == 0
        assert len(read_rows(pair)) == 3
        assert [r["rank"] for r in read_rows(rank)] == ["1", "2", "3"]

    def test_identical_families_degenerate(self, portfolio, capsys):
        code, out, _ = run(["select", portfolio, "--families", "clayton", "clayton"], capsys)
        assert code == 0 and "degenerate" in out

    def test_needs_two(self, portfolio, capsys):
        code, _, _ = run(["select", portfolio, "--families", "clayton"], capsys)
        assert code == 1


class TestSampleData:
    def test_columns_and_determinism(self, tmp_path, capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for p in (a, b):
            assert run(["sample-data", "--n", 20, "--seed", 3, "--out", p], capsys)[0] == 0
        assert a.read_bytes() == b.read_bytes()
        rows = read_rows(a)
        assert list(rows[0]) == ["avg_claim_size", "n_claims", "exposure", "age", "female", "car"]
        assert all(int(r["n_claims"]) >= 1 for r in rows)
