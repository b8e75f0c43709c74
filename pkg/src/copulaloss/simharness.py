"""Simulation study comparing the independence and copula regression fits.

For every value of Kendall's tau, ``R`` datasets are drawn from the true
copula regression model on a fixed design, both models are fitted, and the
replicate metrics are summarized by their mean and the standard error
``sqrt(sum (m_r - mbar)^2 / (R (R - 1)))``.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .copulas import CopulaFamily, CopulaSpec, tau_to_theta
from .joint import JointModel, joint_sample
from .loss import policy_moments
from .margins import GammaParams, ZtpParams
from .regression import Dataset, fit_independence, fit_mle

log = logging.getLogger(__name__)

ALPHA_TRUE = (-0.5, -0.05, -1.0, 2.0, -0.5)
BETA_TRUE = (-1.0, 0.04, 0.3, 0.3, 0.2)
DESIGN_NAMES = ("intercept", "age", "female", "carB", "carC")
METRICS = ("rel_mse_alpha", "rel_mse_beta", "rel_mse_loss", "tau", "aic", "total_loss")
METHODS = ("independence", "joint")


class ConfigError(ValueError):
    def __init__(self, field_name: str, problem: str):
        super().__init__(f"config field '{field_name}': {problem}")
        self.field = field_name


class StudyAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    family: CopulaFamily
    n: int = 500
    R: int = 50
    alpha: tuple = ALPHA_TRUE
    beta: tuple = BETA_TRUE
    delta: float = 0.25
    tau_grid: tuple = (0.1, 0.3, 0.5)
    seed: int = 0
    max_fail_fraction: float = 0.1

    def __post_init__(self):
        try:
            object.__setattr__(self, "family", CopulaFamily.parse(self.family))
        except ValueError as exc:
            raise ConfigError("family", str(exc)) from None
        if self.family is CopulaFamily.INDEPENDENCE:
            raise ConfigError("family", "the simulated model needs a dependent copula family")
        for name in ("n", "R", "seed"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, np.integer)):
                raise ConfigError(name, f"expected an integer, got {val!r}")
        if self.n < 1:
            raise ConfigError("n", "must be positive")
        if self.R < 2:
            raise ConfigError("R", "need at least two replicates")
        if self.seed < 0:
            raise ConfigError("seed", "must be nonnegative")
        if not (isinstance(self.delta, (int, float)) and self.delta > 0 and math.isfinite(self.delta)):
            raise ConfigError("delta", "must be a positive number")
        for name in ("alpha", "beta"):
            vec = tuple(float(v) for v in getattr(self, name))
            if len(vec) != len(DESIGN_NAMES):
                raise ConfigError(name, f"expected {len(DESIGN_NAMES)} coefficients, got {len(vec)}")
            if any(v == 0.0 for v in vec):
                raise ConfigError(name, "relative errors need nonzero true coefficients")
            object.__setattr__(self, name, vec)
        grid = tuple(float(t) for t in self.tau_grid)
        if not grid:
            raise ConfigError("tau_grid", "must not be empty")
        for t in grid:
            if not -1.0 < t < 1.0 or t == 0.0:
                raise ConfigError("tau_grid", f"tau={t} is not a nonzero value in (-1, 1)")
        object.__setattr__(self, "tau_grid", grid)
        if not 0.0 <= self.max_fail_fraction < 1.0:
            raise ConfigError("max_fail_fraction", "must lie in [0, 1)")

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "expected a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(unknown[0], "unknown field")
        if "family" not in raw:
            raise ConfigError("family", "missing required field")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError("<root>", str(exc)) from None

    def to_dict(self) -> dict:
        out = asdict(self)
        out["family"] = self.family.value
        out["alpha"] = list(self.alpha)
        out["beta"] = list(self.beta)
        out["tau_grid"] = list(self.tau_grid)
        return out


def generate_design(n: int, rng: np.random.Generator) -> np.ndarray:
    """Design rows ``[1, age, female, carB, carC]``.

    Age is uniform on [18, 65], the female indicator is Bernoulli(1/2) and
    the three car types are equally likely with type A as reference.
    """
    if n < 1:
        raise ValueError("n must be positive")
    age = rng.uniform(18.0, 65.0, n)
    female = rng.random(n) < 0.5
    car = rng.integers(0, 3, n)
    return np.column_stack([np.ones(n), age, female, car == 1, car == 2]).astype(float)


def rel_mse(gamma_true, gamma_hat) -> float:
    """``mean(((gamma - gamma_hat) / gamma)^2)``."""
    g = np.asarray(gamma_true, dtype=float)
    gh = np.asarray(gamma_hat, dtype=float)
    if g.shape != gh.shape:
        raise ValueError("true and estimated vectors differ in shape")
    if np.any(g == 0.0):
        raise ZeroDivisionError("relative error undefined for a zero true value")
    return float(np.mean(((g - gh) / g) ** 2))


def _true_copula(family, tau) -> CopulaSpec:
    return tau_to_theta(tau, family)


@dataclass
class StudyResult:
    config: SimConfig
    replicates: list          # tidy rows
    summary: list             # aggregated rows
    failures: dict = field(default_factory=dict)   # tau -> count
    true_total: dict = field(default_factory=dict)  # tau -> true expected total loss

    def summary_value(self, tau, method, metric, key="mean"):
        for row in self.summary:
            if row["tau"] == tau and row["method"] == method and row["metric"] == metric:
                return row[key]
        raise KeyError((tau, method, metric))


def _replicate(args):
    cfg, design, tau, r, seed_seq, true_means = args
    rng = np.random.default_rng(seed_seq)
    alpha = np.asarray(cfg.alpha)
    beta = np.asarray(cfg.beta)
    cop = _true_copula(cfg.family, tau)
    mu = np.exp(design @ alpha)
    lam = np.exp(design @ beta)
    x, y = joint_sample(JointModel(GammaParams(mu, cfg.delta), ZtpParams(lam), cop), rng)
    d = Dataset(x, y, design, design, None, DESIGN_NAMES, DESIGN_NAMES)
    rows = []
    try:
        fits = {
            "independence": fit_independence(d),
            "joint": fit_mle(d, cfg.family, rotated=cop.rotated),
        }
    except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        return tau, r, None, f"{type(exc).__name__}: {exc}"
    if not fits["joint"].converged:
        return tau, r, None, f"joint fit did not converge: {fits['joint'].message}"
    for method in METHODS:
        f = fits[method]
        mu_h, lam_h = f.policy_parameters(d)
        m_hat, _ = policy_moments(mu_h, f.delta, lam_h, f.copula)
        values = {
            "rel_mse_alpha": rel_mse(alpha, f.estimate.alpha),
            "rel_mse_beta": rel_mse(beta, f.estimate.beta),
            "rel_mse_loss": rel_mse(true_means, m_hat),
            "tau": f.tau,
            "aic": f.aic,
            "total_loss": float(np.sum(m_hat)),
        }
        for metric in METRICS:
            rows.append({"family": cfg.family.value, "tau": tau, "method": method, "metric": metric,
                         "replicate": r, "value": values[metric]})
    return tau, r, rows, None


def _summarize(cfg, rows, failures, true_total):
    out = []
    for tau in cfg.tau_grid:
        for method in METHODS:
            for metric in METRICS:
                vals = np.array([row["value"] for row in rows
                                 if row["tau"] == tau and row["method"] == method and row["metric"] == metric])
                k = vals.size
                mean = float(np.mean(vals)) if k else float("nan")
                se = float(math.sqrt(np.sum((vals - mean) ** 2) / (k * (k - 1)))) if k > 1 else float("nan")
                out.append({"family": cfg.family.value, "tau": tau, "method": method, "metric": metric,
                            "mean": mean, "se": se, "n_ok": k, "n_failed": failures[tau],
                            "true_total": true_total[tau]})
    return out


def run_study(cfg: SimConfig, workers: int = 1) -> StudyResult:
    """Run the simulation study.

    The design is drawn once from the first child of the master seed and
    held fixed; replicate ``r`` at grid position ``j`` uses its own child
    generator, so results do not depend on ``workers``.

    Raises
    ------
    StudyAborted
        If more than ``max_fail_fraction`` of the replicates at any tau fail.
    """
    root = np.random.SeedSequence(cfg.seed)
    design_seq, *tau_seqs = root.spawn(1 + len(cfg.tau_grid))
    design = generate_design(cfg.n, np.random.default_rng(design_seq))
    alpha = np.asarray(cfg.alpha)
    beta = np.asarray(cfg.beta)
    mu = np.exp(design @ alpha)
    lam = np.exp(design @ beta)

    tasks = []
    true_total = {}
    for tau, seq in zip(cfg.tau_grid, tau_seqs):
        true_means, _ = policy_moments(mu, cfg.delta, lam, _true_copula(cfg.family, tau))
        true_total[tau] = float(np.sum(true_means))
        for r, child in enumerate(seq.spawn(cfg.R)):
            tasks.append((cfg, design, tau, r, child, true_means))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_replicate, tasks))
    else:
        results = [_replicate(t) for t in tasks]

    results.sort(key=lambda t: (cfg.tau_grid.index(t[0]), t[1]))
    rows = []
    failures = {tau: 0 for tau in cfg.tau_grid}
    for tau, r, rep_rows, err in results:
        if rep_rows is None:
            failures[tau] += 1
            log.warning("replicate %d at tau=%g failed: %s", r, tau, err)
        else:
            rows.extend(rep_rows)
    for tau, k in failures.items():
        if k > cfg.max_fail_fraction * cfg.R:
            raise StudyAborted(f"{k} of {cfg.R} replicates failed at tau={tau}")
    if any(failures.values()):
        log.info("excluded failed replicates: %s", failures)
    return StudyResult(cfg, rows, _summarize(cfg, rows, failures, true_total), failures, true_total)
