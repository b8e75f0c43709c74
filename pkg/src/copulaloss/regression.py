"""Copula regression for average claim size and claim count.

Severity follows a Gamma GLM with log link, ``ln mu_i = r_i' alpha``, and
frequency a zero-truncated Poisson GLM with exposure offset,
``ln lam_i = ln e_i + s_i' beta``. A single copula with parameter ``theta``
couples the two, and the Gamma dispersion ``delta`` is shared.

The optimizer works on ``(alpha, beta, g(theta), ln delta)`` where ``g`` is
the family's unconstraining map, so the search is unconstrained.
Standard errors come from a central finite-difference Hessian of the
loglikelihood in these coordinates and are carried to ``theta``, ``delta``
and Kendall's tau by the delta method.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize, special, stats

from .copulas import (
    CopulaFamily,
    CopulaSpec,
    constrain,
    dtau_dtheta,
    dtheta_dg,
    h_function,
    tau_to_theta,
    theta_to_tau,
    unconstrain,
)
from .joint import LOG_FLOOR, JointModel
from .margins import GammaParams, ZtpParams, gamma_cdf, gamma_logpdf, ztp_cdf, ztp_logpmf, ztp_mean_var
from .optim import bfgs_maximize, central_gradient, newton_polish, numerical_hessian

log = logging.getLogger(__name__)


class RankDeficiencyError(ValueError):
    pass


class SingularHessianError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Observed policies.

    Parameters
    ----------
    x : (n,) array
        Average claim sizes, positive.
    y : (n,) array
        Claim counts, positive integers.
    R, S : (n, p) and (n, q) arrays
        Severity and frequency design matrices.
    e : (n,) array, optional
        Exposures, positive; defaults to ones.
    """

    x: np.ndarray
    y: np.ndarray
    R: np.ndarray
    S: np.ndarray
    e: np.ndarray | None = None
    severity_names: tuple = ()
    frequency_names: tuple = ()
    encoding: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y)
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        S = np.atleast_2d(np.asarray(self.S, dtype=float))
        n = x.shape[0]
        e = np.ones(n) if self.e is None else np.asarray(self.e, dtype=float)
        if y.shape != (n,) or R.shape[0] != n or S.shape[0] != n or e.shape != (n,):
            raise ValueError("x, y, R, S and e must have the same number of rows")
        if np.any(~(x > 0)) or not np.all(np.isfinite(x)):
            raise ValueError("claim sizes must be positive and finite")
        if np.any(y < 1) or np.any(np.asarray(y, dtype=float) % 1 != 0):
            raise ValueError("claim counts must be positive integers")
        if np.any(~(e > 0)):
            raise ValueError("exposures must be positive")
        if not (np.all(np.isfinite(R)) and np.all(np.isfinite(S))):
            raise ValueError("design matrices must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y.astype(np.int64))
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "e", e)
        if not self.severity_names:
            object.__setattr__(self, "severity_names", tuple(f"r{j}" for j in range(R.shape[1])))
        if not self.frequency_names:
            object.__setattr__(self, "frequency_names", tuple(f"s{j}" for j in range(S.shape[1])))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.R.shape[1]

    @property
    def q(self) -> int:
        return self.S.shape[1]


@dataclass(frozen=True)
class ParamVector:
    """Regression parameters in optimizer coordinates.

    ``g_theta`` is ``None`` for the independence model.
    """

    alpha: np.ndarray
    beta: np.ndarray
    g_theta: float | None
    log_delta: float

    def pack(self) -> np.ndarray:
        mid = [] if self.g_theta is None else [self.g_theta]
        return np.concatenate([self.alpha, self.beta, mid, [self.log_delta]])

    @classmethod
    def unpack(cls, vec, p: int, q: int, with_theta: bool = True) -> "ParamVector":
        vec = np.asarray(vec, dtype=float)
        if vec.size != p + q + 1 + int(with_theta):
            raise ValueError(f"expected {p + q + 1 + int(with_theta)} parameters, got {vec.size}")
        g = float(vec[p + q]) if with_theta else None
        return cls(vec[:p].copy(), vec[p:p + q].copy(), g, float(vec[-1]))

    @property
    def delta(self) -> float:
        return math.exp(self.log_delta)


def linear_predictors(d: Dataset, params: ParamVector):
    """Per-row Gamma means and ZTP intensities, ``(mu, lam)``."""
    alpha = np.asarray(params.alpha, dtype=float)
    beta = np.asarray(params.beta, dtype=float)
    if alpha.shape != (d.p,) or beta.shape != (d.q,):
        raise ValueError(
            f"coefficient dimensions {alpha.shape}, {beta.shape} do not match "
            f"design widths p={d.p}, q={d.q}"
        )
    mu = np.exp(d.R @ alpha)
    lam = d.e * np.exp(d.S @ beta)
    return mu, lam


def _copula_of(params: ParamVector, family, rotated=False) -> CopulaSpec:
    fam = CopulaFamily.parse(family)
    if fam is CopulaFamily.INDEPENDENCE or params.g_theta is None:
        return CopulaSpec.independence()
    return constrain(params.g_theta, fam, rotated)


def pointwise_loglik(d: Dataset, params: ParamVector, family, rotated=False) -> np.ndarray:
    mu, lam = linear_predictors(d, params)
    if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(lam)) and np.all(mu > 0) and np.all(lam > 0)):
        return np.full(d.n, LOG_FLOOR)
    delta = params.delta
    if not (np.isfinite(delta) and delta > 0):
        return np.full(d.n, LOG_FLOOR)
    sev = GammaParams(mu, delta)
    freq = ZtpParams(lam)
    cop = _copula_of(params, family, rotated)
    log_fx = gamma_logpdf(d.x, sev)
    if cop.family is CopulaFamily.INDEPENDENCE:
        ll = log_fx + ztp_logpmf(d.y, freq)
    else:
        u = gamma_cdf(d.x, sev)
        yv = d.y.astype(float)
        diff = h_function(u, ztp_cdf(yv, freq), cop) - h_function(u, ztp_cdf(yv - 1.0, freq), cop)
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = log_fx + np.log(np.clip(diff, 0.0, 1.0))
    return np.maximum(np.nan_to_num(ll, nan=LOG_FLOOR, neginf=LOG_FLOOR), LOG_FLOOR)


def dataset_loglik(d: Dataset, params, family, rotated=False) -> float:
    """Loglikelihood of the whole dataset, pairwise-summed."""
    if not isinstance(params, ParamVector):
        params = ParamVector.unpack(params, d.p, d.q, CopulaFamily.parse(family) is not CopulaFamily.INDEPENDENCE)
    return float(np.sum(pointwise_loglik(d, params, family, rotated)))


# --------------------------------------------------------------------------
# Results
# --------------------------------------------------------------------------

@dataclass
class FitResult:
    """Outcome of a regression fit.

    ``covariance`` is the inverse observed Fisher information in optimizer
    coordinates ``(alpha, beta, g(theta), ln delta)``. ``estimate_natural``
    and ``std_errors`` are on the reporting scale ``(alpha, beta, theta,
    delta)``; for the independence model the ``theta`` entry is absent.
    """

    family: CopulaFamily
    method: str
    estimate: ParamVector
    covariance: np.ndarray
    loglik: float
    pointwise_loglik: np.ndarray
    dof: int
    converged: bool
    iterations: int
    severity_names: tuple
    frequency_names: tuple
    rotated: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def aic(self) -> float:
        return -2.0 * self.loglik + 2.0 * self.dof

    @property
    def copula(self) -> CopulaSpec:
        return _copula_of(self.estimate, self.family, self.rotated)

    @property
    def theta(self) -> float | None:
        return None if self.family is CopulaFamily.INDEPENDENCE else self.copula.theta

    @property
    def delta(self) -> float:
        return self.estimate.delta

    @property
    def tau(self) -> float:
        return theta_to_tau(self.copula)

    @property
    def names(self) -> list:
        mid = [] if self.family is CopulaFamily.INDEPENDENCE else ["theta"]
        return ([f"alpha[{n}]" for n in self.severity_names]
                + [f"beta[{n}]" for n in self.frequency_names] + mid + ["delta"])

    def _jacobian(self) -> np.ndarray:
        vec = self.estimate.pack()
        J = np.eye(vec.size)
        if self.family is not CopulaFamily.INDEPENDENCE:
            k = len(self.estimate.alpha) + len(self.estimate.beta)
            J[k, k] = dtheta_dg(self.estimate.g_theta, self.family)
        J[-1, -1] = self.delta
        return J

    @property
    def estimate_natural(self) -> np.ndarray:
        vec = self.estimate.pack()
        if self.family is not CopulaFamily.INDEPENDENCE:
            vec[len(self.estimate.alpha) + len(self.estimate.beta)] = self.theta
        vec[-1] = self.delta
        return vec

    @property
    def covariance_natural(self) -> np.ndarray:
        J = self._jacobian()
        return J @ self.covariance @ J.T

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.maximum(np.diag(self.covariance_natural), 0.0))

    @property
    def tau_se(self) -> float:
        if self.family is CopulaFamily.INDEPENDENCE:
            return 0.0
        k = len(self.estimate.alpha) + len(self.estimate.beta)
        return abs(dtau_dtheta(self.copula)) * float(self.std_errors[k])

    def policy_parameters(self, d: Dataset):
        """Per-row ``(mu, lam)`` under the fitted coefficients."""
        return linear_predictors(d, self.estimate)

    def joint_model(self, d: Dataset) -> JointModel:
        mu, lam = self.policy_parameters(d)
        return JointModel(GammaParams(mu, self.delta), ZtpParams(lam), self.copula)


def wald_ci(fit: FitResult, level: float = 0.95) -> np.ndarray:
    """Per-parameter Wald intervals on the reporting scale, shape ``(k, 2)``."""
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    z = stats.norm.ppf(0.5 + level / 2.0)
    est = fit.estimate_natural
    se = fit.std_errors
    return np.column_stack([est - z * se, est + z * se])


def tau_ci(fit: FitResult, level: float = 0.95):
    z = stats.norm.ppf(0.5 + level / 2.0)
    return fit.tau - z * fit.tau_se, fit.tau + z * fit.tau_se


# --------------------------------------------------------------------------
# Marginal GLMs
# --------------------------------------------------------------------------

def check_rank(M: np.ndarray, name: str = "design matrix"):
    """Raise unless ``M`` has full column rank (column-pivoted QR)."""
    if M.shape[0] < M.shape[1]:
        raise RankDeficiencyError(f"{name} has fewer rows than columns")
    _, Rm, piv = linalg.qr(M, mode="economic", pivoting=True)
    diag = np.abs(np.diag(Rm))
    tol = diag[0] * max(M.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.sum(diag > tol))
    if rank < M.shape[1]:
        bad = sorted(int(j) for j in piv[rank:])
        raise RankDeficiencyError(f"{name} is rank deficient (rank {rank} < {M.shape[1]}); dependent columns {bad}")


def _newton(score_hess, beta0, objective, maxiter=100, tol=1e-12):
    beta = np.array(beta0, dtype=float)
    obj = objective(beta)
    for _ in range(maxiter):
        g, H = score_hess(beta)
        step = np.linalg.solve(H, g)
        t = 1.0
        while True:
            cand = beta + t * step
            new = objective(cand)
            if np.isfinite(new) and new >= obj - 1e-12 * abs(obj):
                break
            t *= 0.5
            if t < 1e-10:
                return beta
        beta, obj_old, obj = cand, obj, new
        if np.max(np.abs(t * step)) < tol * max(1.0, np.max(np.abs(beta))):
            break
    return beta


def fit_gamma_glm(x, R):
    """Gamma regression with log link by Newton-Raphson.

    Returns ``(alpha, delta)`` where ``delta`` is the maximum-likelihood
    dispersion given ``alpha``.
    """
    x = np.asarray(x, dtype=float)
    R = np.asarray(R, dtype=float)

    def objective(a):
        eta = R @ a
        return float(np.sum(-x * np.exp(-eta) - eta))

    def score_hess(a):
        t = x * np.exp(-(R @ a))
        g = R.T @ (t - 1.0)
        H = (R * t[:, None]).T @ R
        return g, H

    a0 = np.linalg.lstsq(R, np.log(x), rcond=None)[0]
    alpha = _newton(score_hess, a0, objective)
    t = x / np.exp(R @ alpha)
    c = -1.0 - np.mean(np.log(t) - t)
    # ln k - digamma(k) = c is decreasing in k
    if c <= 0:
        delta = 1e-8
    else:
        f = lambda lk: math.log(math.exp(lk)) - special.digamma(math.exp(lk)) - c
        lo, hi = -30.0, 30.0
        lk = optimize.brentq(f, lo, hi, xtol=1e-14, rtol=1e-14)
        delta = math.exp(-lk)
    return alpha, delta


def fit_ztp_glm(y, S, e=None):
    """Zero-truncated Poisson regression with log link and exposure offset."""
    y = np.asarray(y, dtype=float)
    S = np.asarray(S, dtype=float)
    off = np.zeros(y.size) if e is None else np.log(np.asarray(e, dtype=float))

    def objective(b):
        eta = off + S @ b
        lam = np.exp(eta)
        return float(np.sum(y * eta - lam - np.log(-np.expm1(-lam))))

    def score_hess(b):
        lam = np.exp(off + S @ b)
        m, v = ztp_mean_var(ZtpParams(lam))
        return S.T @ (y - m), (S * v[:, None]).T @ S

    b0 = np.linalg.lstsq(S, np.log(np.maximum(y - 0.5, 0.25)) - off, rcond=None)[0]
    return _newton(score_hess, b0, objective)


# --------------------------------------------------------------------------
# Fitting
# --------------------------------------------------------------------------

def observed_fisher(d: Dataset, params: ParamVector, family, rotated=False, steps=None) -> np.ndarray:
    """Negated finite-difference Hessian of :func:`dataset_loglik`."""
    with_theta = params.g_theta is not None
    vec = params.pack()

    def f(z):
        return dataset_loglik(d, ParamVector.unpack(z, d.p, d.q, with_theta), family, rotated)

    return -numerical_hessian(f, vec, steps)


def _invert_fisher(info: np.ndarray) -> np.ndarray:
    cond = np.linalg.cond(info)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularHessianError(f"observed Fisher information is not invertible (condition number {cond:.3g})")
    cov = np.linalg.inv(info)
    return 0.5 * (cov + cov.T)


def _check_dataset(d: Dataset, k: int):
    if d.n <= k:
        raise ValueError(f"need more than {k} observations, got {d.n}")
    check_rank(d.R, "severity design R")
    check_rank(d.S, "frequency design S")


def _finish(d, family, method, params, rotated, converged, iterations, message="", extra=None):
    info = observed_fisher(d, params, family, rotated)
    cov = _invert_fisher(info)
    pll = pointwise_loglik(d, params, family, rotated)
    dof = d.p + d.q + (1 if params.g_theta is None else 2)
    return FitResult(
        family=CopulaFamily.parse(family), method=method, estimate=params, covariance=cov,
        loglik=float(np.sum(pll)), pointwise_loglik=pll, dof=dof, converged=converged,
        iterations=iterations, severity_names=d.severity_names, frequency_names=d.frequency_names,
        rotated=rotated, message=message, extra=extra or {},
    )


def fit_independence(d: Dataset) -> FitResult:
    """Independence model: separate Gamma and ZTP regressions (``p + q + 1`` parameters)."""
    _check_dataset(d, d.p + d.q + 1)
    alpha, delta = fit_gamma_glm(d.x, d.R)
    beta = fit_ztp_glm(d.y, d.S, d.e)
    params = ParamVector(alpha, beta, None, math.log(delta))
    return _finish(d, CopulaFamily.INDEPENDENCE, "mle", params, False, True, 0, "closed-form margins")


def _ifm_theta(u, v, w, family, rotated):
    fam = CopulaFamily.parse(family)

    def obj(g):
        cop = constrain(float(np.atleast_1d(g)[0]), fam, rotated)
        diff = h_function(u, v, cop) - h_function(u, w, cop)
        with np.errstate(divide="ignore"):
            ll = np.log(np.clip(diff, 0.0, 1.0))
        return float(np.sum(np.maximum(ll, LOG_FLOOR)))

    if fam in (CopulaFamily.GAUSS, CopulaFamily.FRANK):
        grid = [-0.6, -0.4, -0.2, -0.05, 0.05, 0.2, 0.4, 0.6]
    else:
        grid = [0.02, 0.1, 0.2, 0.35, 0.5, 0.7]
    starts = [unconstrain(tau_to_theta(-t if rotated else t, fam)) for t in grid]
    g0 = max(starts, key=obj)
    res = bfgs_maximize(obj, np.array([g0]), gtol=1e-7, ftol=1e-14)
    return res


def fit_ifm(d: Dataset, family, rotated: bool = False) -> FitResult:
    """Inference-for-margins estimate.

    Stage one fits the Gamma and ZTP regressions separately. Stage two maps
    the data to ``u = F_X(x)``, ``v = F_Y(y)``, ``w = F_Y(y - 1)`` and
    maximizes ``sum ln(D1(u, v) - D1(u, w))`` over ``g(theta)``.
    The reported covariance is the inverse observed Fisher information of
    the full likelihood at the IFM estimate.
    """
    fam = CopulaFamily.parse(family)
    if fam is CopulaFamily.INDEPENDENCE:
        return fit_independence(d)
    _check_dataset(d, d.p + d.q + 2)
    alpha, delta = fit_gamma_glm(d.x, d.R)
    beta = fit_ztp_glm(d.y, d.S, d.e)
    mu = np.exp(d.R @ alpha)
    lam = d.e * np.exp(d.S @ beta)
    u = gamma_cdf(d.x, GammaParams(mu, delta))
    yv = d.y.astype(float)
    v = ztp_cdf(yv, ZtpParams(lam))
    w = ztp_cdf(yv - 1.0, ZtpParams(lam))
    res = _ifm_theta(u, v, w, fam, rotated)
    g = float(unconstrain(constrain(res.x[0], fam, rotated)))
    params = ParamVector(alpha, beta, g, math.log(delta))
    return _finish(d, fam, "ifm", params, rotated, res.converged, res.iterations, res.message,
                   {"stage2_loglik": res.fun})


def fit_mle(d: Dataset, family, init: ParamVector | None = None, rotated: bool = False,
            gtol: float = 1e-6, ftol: float = 1e-10, maxiter: int = 500) -> FitResult:
    """Full maximum-likelihood fit by BFGS, started from the IFM estimate by default.

    Non-convergence is reported through ``converged=False``.
    """
    fam = CopulaFamily.parse(family)
    if fam is CopulaFamily.INDEPENDENCE:
        return fit_independence(d)
    _check_dataset(d, d.p + d.q + 2)
    if init is None:
        init = fit_ifm(d, fam, rotated).estimate
    x0 = init.pack()
    if x0.size != d.p + d.q + 2:
        raise ValueError("initial parameter vector has the wrong dimension")

    def f(z):
        return dataset_loglik(d, ParamVector.unpack(z, d.p, d.q), fam, rotated)

    res = bfgs_maximize(f, x0, gtol=gtol, ftol=ftol, maxiter=maxiter)
    xs, grad, polished = res.x, res.grad, 0
    if res.converged and np.max(np.abs(res.grad)) >= gtol:
        xs, grad, polished = newton_polish(f, res.x, gtol=gtol)
        if f(xs) < res.fun - 1e-9 * max(1.0, abs(res.fun)):
            xs, grad, polished = res.x, res.grad, 0
    params = ParamVector.unpack(xs, d.p, d.q)
    if not res.converged:
        log.warning("MLE for %s did not converge: %s", fam.value, res.message)
    return _finish(d, fam, "mle", params, rotated, res.converged, res.iterations + polished, res.message,
                   {"gradient": grad, "init_loglik": f(x0), "newton_steps": polished})


def loglik_gradient(d: Dataset, params: ParamVector, family, rotated=False) -> np.ndarray:
    """Central finite-difference gradient of :func:`dataset_loglik`."""
    with_theta = params.g_theta is not None
    return central_gradient(
        lambda z: dataset_loglik(d, ParamVector.unpack(z, d.p, d.q, with_theta), family, rotated),
        params.pack(),
    )
