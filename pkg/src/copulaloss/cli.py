"""Command-line interface.

Exit codes: 0 on success, 1 for input errors, 2 when a numerical routine
fails to converge.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .copulas import FAMILIES, ROTATABLE, CopulaFamily, CopulaSpec, tau_to_theta
from .io import InputError, SavedModel, load_model, read_portfolio, save_model, write_csv
from .joint import JointModel, joint_sample
from .loss import LossDistribution, QuadratureError, loss_curve_vs_tau, loss_pdf, loss_summary
from .margins import GammaParams, ZtpParams
from .portfolio import total_loss, total_loss_quantile
from .regression import RankDeficiencyError, SingularHessianError, fit_ifm, fit_independence, fit_mle, tau_ci, wald_ci
from .selection import aic_ranking, pairwise_vuong
from .simharness import ALPHA_TRUE, BETA_TRUE, ConfigError, SimConfig, StudyAborted, generate_design, run_study

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2
log = logging.getLogger(__name__)
FAMILY_CHOICES = [f.value for f in CopulaFamily]


class NonConvergence(RuntimeError):
    pass


def _fmt(v) -> str:
    return f"{v:.6g}" if isinstance(v, float) else str(v)


def _print_table(rows, columns, out=None):
    out = out or sys.stdout
    widths = [max(len(c), *(len(_fmt(r[c])) for r in rows)) for c in columns]
    out.write("  ".join(c.rjust(w) for c, w in zip(columns, widths)) + "\n")
    for r in rows:
        out.write("  ".join(_fmt(r[c]).rjust(w) for c, w in zip(columns, widths)) + "\n")


def _fit(d, family, method, rotated):
    fam = CopulaFamily.parse(family)
    if rotated and fam not in ROTATABLE:
        raise InputError(f"family '{fam.value}' cannot be rotated")
    if fam is CopulaFamily.INDEPENDENCE:
        return fit_independence(d)
    if method == "ifm":
        return fit_ifm(d, fam, rotated)
    return fit_mle(d, fam, rotated=rotated)


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------

def cmd_fit(args) -> int:
    d = read_portfolio(args.data)
    fit = _fit(d, args.family, args.method, args.rotated)
    ci = wald_ci(fit, args.level)
    rows = [
        {"parameter": name, "estimate": float(est), "std_error": float(se), "ci_low": float(lo), "ci_high": float(hi)}
        for name, est, se, (lo, hi) in zip(fit.names, fit.estimate_natural, fit.std_errors, ci)
    ]
    print(f"family: {fit.family.value}{' (rotated)' if fit.rotated else ''}   method: {fit.method}   n: {d.n}")
    _print_table(rows, ["parameter", "estimate", "std_error", "ci_low", "ci_high"])
    if fit.family is not CopulaFamily.INDEPENDENCE:
        lo, hi = tau_ci(fit, args.level)
        print(f"kendall tau: {fit.tau:.6g} +/- {fit.tau_se:.6g}  ({args.level:g} CI {lo:.6g}, {hi:.6g})")
    print(f"loglik: {fit.loglik:.10g}   dof: {fit.dof}   aic: {fit.aic:.10g}")
    print(f"converged: {fit.converged}   iterations: {fit.iterations}")
    if args.csv:
        write_csv(rows, args.csv)
    if args.out:
        save_model(fit, args.out, d.encoding)
    if not fit.converged:
        print(f"error: optimizer did not converge ({fit.message})", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _parse_family_list(items):
    out = []
    for item in items:
        name = item.lower()
        rotated = name.endswith("-rotated")
        fam = CopulaFamily.parse(name[:-8] if rotated else name)
        out.append((fam, rotated))
    return out


def cmd_select(args) -> int:
    fams = _parse_family_list(args.families)
    if len(fams) < 2:
        raise InputError("select needs at least two families")
    d = read_portfolio(args.data)
    fits = []
    for fam, rotated in fams:
        fit = _fit(d, fam, args.method, rotated)
        if not fit.converged:
            raise NonConvergence(f"fit for {fam.value} did not converge")
        fits.append(fit)
    table = pairwise_vuong(fits, args.level)
    ranking = aic_ranking(fits)
    print(f"pairwise Vuong tests (level {args.level:g}):")
    _print_table(table, ["model1", "model2", "statistic", "preferred"])
    print("\nAIC ranking:")
    _print_table(ranking, ["rank", "family", "loglik", "dof", "aic"])
    if args.out:
        write_csv(table, args.out)
    if args.aic_out:
        write_csv(ranking, args.aic_out)
    return EXIT_OK


def _copula_from_args(family, tau, theta, rotated=False) -> CopulaSpec:
    fam = CopulaFamily.parse(family)
    if fam is CopulaFamily.INDEPENDENCE:
        return CopulaSpec.independence()
    if theta is not None:
        return CopulaSpec(fam, theta, rotated)
    if tau is None:
        raise InputError(f"family '{fam.value}' needs --tau or --theta")
    if tau == 0.0:
        return CopulaSpec.independence()
    return tau_to_theta(tau, fam)


def cmd_loss(args) -> int:
    if args.model:
        m = load_model(args.model)
        if args.data is None:
            raise InputError("--model needs --data with the policy row")
        d = read_portfolio(args.data, m.encoding)
        if not 0 <= args.row < d.n:
            raise InputError(f"--row {args.row} is outside 0..{d.n - 1}")
        jm = m.joint_model(d)
        mu = float(jm.severity.mu[args.row])
        lam = float(jm.frequency.lam[args.row])
        delta = m.delta
        cop = m.copula
    else:
        mu, delta, lam = args.mu, args.delta, args.lam
        cop = None if args.tau_sweep else _copula_from_args(args.family, args.tau, args.theta, args.rotated)
    sev, freq = GammaParams(mu, delta), ZtpParams(lam)

    if args.tau_sweep:
        grid = [float(t) for t in args.tau_grid.split(",")]
        rows = []
        for fam in FAMILIES:
            for r in loss_curve_vs_tau(sev, freq, fam, grid):
                rows.append({"family": fam.value, **r})
        _print_table(rows, ["family", "tau", "mean", "q25", "q75"])
        if args.out:
            write_csv(rows, args.out)
        return EXIT_OK

    ld = LossDistribution(JointModel(sev, freq, cop))
    s = loss_summary(ld)
    hi = args.l_max if args.l_max else s["q75"] * 4.0
    l = np.linspace(hi / args.grid_points, hi, args.grid_points)
    dens = loss_pdf(l, ld)
    label = cop.family.value + (" (rotated)" if cop.rotated else "")
    print(f"copula: {label}   theta: {cop.theta:.10g}   tau: {cop.tau:.6g}")
    for key in ("mean", "variance", "q25", "q75"):
        print(f"{key}: {s[key]:.10g}")
    if args.out:
        write_csv([{"l": float(a), "density": float(b)} for a, b in zip(l, dens)], args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        raw = json.loads(Path(args.config).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if args.seed is not None:
        raw["seed"] = args.seed
    cfg = SimConfig.from_dict(raw)
    res = run_study(cfg, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(res.replicates, out / "replicates.csv")
    write_csv(res.summary, out / "summary.csv")
    rows = [r for r in res.summary if r["metric"] in ("tau", "aic", "rel_mse_loss", "total_loss")]
    _print_table(rows, ["tau", "method", "metric", "mean", "se", "n_ok", "n_failed"])
    return EXIT_OK


def cmd_total_loss(args) -> int:
    m = load_model(args.model)
    d = read_portfolio(args.data, m.encoding)
    est = total_loss(m.joint_model(d))
    estimates = [(m.family.value, est)]
    try:
        ind_fit = fit_independence(d)
    except (RankDeficiencyError, ValueError) as exc:
        log.warning("independence refit skipped: %s", exc)
    else:
        estimates.append(("independence-refit", total_loss(ind_fit.joint_model(d))))
    rows = []
    for label, e in estimates:
        row = {"model": label, "n": e.n, "mean": e.mean, "sd": e.sd}
        for q in args.quantiles:
            row[f"q{q:g}"] = total_loss_quantile(e, q)
        rows.append(row)
    _print_table(rows, list(rows[0].keys()))
    if len(estimates) > 1:
        print(f"ratio independence/{m.family.value}: {estimates[1][1].mean / est.mean:.6g}")
    if args.out:
        write_csv([{**r, "ratio_to_model": r["mean"] / est.mean} for r in rows], args.out)
    return EXIT_OK


def cmd_sample_data(args) -> int:
    rng = np.random.default_rng(args.seed)
    design = generate_design(args.n, rng)
    cop = _copula_from_args(args.family, args.tau, None)
    mu = np.exp(design @ np.array(ALPHA_TRUE))
    lam = np.exp(design @ np.array(BETA_TRUE))
    x, y = joint_sample(JointModel(GammaParams(mu, args.delta), ZtpParams(lam), cop), rng)
    car = np.where(design[:, 3] == 1, "B", np.where(design[:, 4] == 1, "C", "A"))
    rows = [
        {"avg_claim_size": float(x[i]), "n_claims": int(y[i]), "exposure": 1.0,
         "age": float(design[i, 1]), "female": int(design[i, 2]), "car": str(car[i])}
        for i in range(args.n)
    ]
    write_csv(rows, args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------

def _probability(s):
    v = float(s)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"{s} is not in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="copulaloss", description="Copula models for claim frequency and severity.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a copula regression model to a portfolio CSV")
    f.add_argument("data")
    f.add_argument("--family", choices=FAMILY_CHOICES, default="gauss")
    f.add_argument("--rotated", action="store_true", help="use the rotated Clayton/Gumbel family (negative tau)")
    f.add_argument("--method", choices=["mle", "ifm"], default="mle")
    f.add_argument("--level", type=_probability, default=0.95, help="confidence level of the Wald intervals")
    f.add_argument("--out", help="write the fitted model as JSON")
    f.add_argument("--csv", help="write the coefficient table as CSV")
    f.add_argument("--seed", type=int, default=0, help="accepted for uniformity; fitting is deterministic")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("select", help="pairwise Vuong tests and AIC ranking")
    s.add_argument("data")
    s.add_argument("--families", nargs="+", default=[x.value for x in FAMILIES],
                   help="family names; append -rotated for rotated Clayton/Gumbel")
    s.add_argument("--method", choices=["mle", "ifm"], default="mle")
    s.add_argument("--level", type=_probability, default=0.05, help="significance level of the tests")
    s.add_argument("--out", help="write the pairwise table as CSV")
    s.add_argument("--aic-out", help="write the AIC ranking as CSV")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_select)

    lo = sub.add_parser("loss", help="policy-loss density, moments and quartiles")
    lo.add_argument("--mu", type=float, default=1000.0)
    lo.add_argument("--delta", type=float, default=0.09)
    lo.add_argument("--lam", type=float, default=2.5)
    lo.add_argument("--family", choices=FAMILY_CHOICES, default="independence")
    lo.add_argument("--tau", type=float)
    lo.add_argument("--theta", type=float)
    lo.add_argument("--rotated", action="store_true")
    lo.add_argument("--model", help="fitted model JSON; use with --data and --row")
    lo.add_argument("--data")
    lo.add_argument("--row", type=int, default=0)
    lo.add_argument("--grid-points", type=int, default=400)
    lo.add_argument("--l-max", type=float, help="upper end of the density grid (default 4 x q75)")
    lo.add_argument("--tau-sweep", action="store_true", help="mean and quartiles over a tau grid for all families")
    lo.add_argument("--tau-grid", default="-0.5,-0.4,-0.3,-0.2,-0.1,0,0.1,0.2,0.3,0.4,0.5",
                    help="comma-separated taus; write as --tau-grid=-0.3,... when the first is negative")
    lo.add_argument("--out", help="write the density grid (or sweep table) as CSV")
    lo.add_argument("--seed", type=int, default=0)
    lo.set_defaults(func=cmd_loss)

    sm = sub.add_parser("simulate", help="run the simulation study from a JSON config")
    sm.add_argument("config")
    sm.add_argument("--out", default="simulation-output", help="output directory")
    sm.add_argument("--seed", type=int, help="override the config seed")
    sm.add_argument("--workers", type=int, default=1)
    sm.set_defaults(func=cmd_simulate)

    t = sub.add_parser("total-loss", help="portfolio total loss under a fitted model and an independence refit")
    t.add_argument("data")
    t.add_argument("--model", required=True)
    t.add_argument("--quantiles", type=_probability, nargs="*", default=[0.5, 0.95, 0.99])
    t.add_argument("--out")
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_total_loss)

    g = sub.add_parser("sample-data", help="simulate a portfolio CSV from the simulation design")
    g.add_argument("--n", type=int, default=500)
    g.add_argument("--family", choices=FAMILY_CHOICES, default="clayton")
    g.add_argument("--tau", type=float, default=0.3)
    g.add_argument("--delta", type=float, default=0.25)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_sample_data)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (NonConvergence, QuadratureError, SingularHessianError, StudyAborted) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ConfigError, RankDeficiencyError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
