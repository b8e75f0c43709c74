"""Joint model of a continuous average claim size and a positive claim count.

The pair ``(X, Y)`` has Gamma and zero-truncated Poisson margins coupled by a
copula ``C``. Because ``Y`` is discrete, the joint density-mass function is

    f(x, y) = f_X(x) * [D1(F_X(x), F_Y(y)) - D1(F_X(x), F_Y(y - 1))]

and the bracket is the conditional pmf of ``Y`` given ``X = x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .copulas import EPS, CopulaFamily, CopulaSpec, copula_sample, h_function
from .margins import (
    GammaParams,
    ZtpParams,
    gamma_cdf,
    gamma_logpdf,
    gamma_quantile,
    ztp_cdf,
    ztp_quantile,
    ztp_upper_bound,
)

#: Floor for the log density, ln(1e-300).
LOG_FLOOR = math.log(1e-300)


@dataclass(frozen=True)
class JointModel:
    """Gamma severity, ZTP frequency and the copula coupling them.

    Margin parameters may be arrays (one entry per policy); evaluation then
    broadcasts against ``x`` and ``y``.
    """

    severity: GammaParams
    frequency: ZtpParams
    copula: CopulaSpec

    @classmethod
    def from_params(cls, mu, delta, lam, copula: CopulaSpec | None = None) -> "JointModel":
        return cls(GammaParams(mu, delta), ZtpParams(lam), copula or CopulaSpec.independence())

    def with_copula(self, copula: CopulaSpec) -> "JointModel":
        return JointModel(self.severity, self.frequency, copula)


def _check_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if np.any(~(x > 0)):
        raise ValueError("claim size x must be positive")
    if np.any(y < 1) or np.any(np.asarray(y, dtype=float) % 1 != 0):
        raise ValueError("claim count y must be a positive integer")
    return x, np.asarray(y, dtype=float)


def _h_difference(u, v_hi, v_lo, copula):
    if copula.family is CopulaFamily.INDEPENDENCE:
        d = v_hi - v_lo
    else:
        d = h_function(u, v_hi, copula) - h_function(u, v_lo, copula)
    return np.clip(d, 0.0, 1.0)


def _pmf_terms(x, y, m: JointModel):
    u = gamma_cdf(x, m.severity)
    v = ztp_cdf(y, m.frequency)
    w = ztp_cdf(y - 1.0, m.frequency)
    return _h_difference(u, v, w, m.copula)


def conditional_pmf(y, x, m: JointModel):
    """``P(Y = y | X = x)`` under the joint model."""
    x, y = _check_xy(x, y)
    return _pmf_terms(x, y, m)


def joint_density(x, y, m: JointModel):
    """Joint density of ``X`` at ``x`` and probability mass of ``Y`` at ``y``."""
    x, y = _check_xy(x, y)
    return np.exp(gamma_logpdf(x, m.severity)) * _pmf_terms(x, y, m)


def point_loglik(x, y, m: JointModel):
    """Pointwise log of :func:`joint_density`, floored at ``ln(1e-300)``."""
    x, y = _check_xy(x, y)
    d = _pmf_terms(x, y, m)
    with np.errstate(divide="ignore"):
        ll = gamma_logpdf(x, m.severity) + np.log(d)
    return np.maximum(ll, LOG_FLOOR)


def loglik(x, y, m: JointModel) -> float:
    """Sum of :func:`point_loglik` using numpy's pairwise summation."""
    return float(np.sum(point_loglik(x, y, m)))


def conditional_pmf_table(x: float, m: JointModel, y_max: int | None = None):
    """Conditional pmf of ``Y`` given ``X = x`` on ``y = 1..y_max``."""
    if y_max is None:
        y_max = ztp_upper_bound(m.frequency)
    y = np.arange(1, y_max + 1)
    return y, conditional_pmf(y, x, m)


def joint_sample(m: JointModel, rng: np.random.Generator, size=None):
    """Sample ``(X, Y)`` by transforming copula draws through the marginal quantiles."""
    if size is None:
        size = np.broadcast(np.asarray(m.severity.mu), np.asarray(m.frequency.lam)).shape or None
    u, v = copula_sample(m.copula, rng, size)
    u = np.clip(u, EPS, 1.0 - EPS)
    x = gamma_quantile(u, m.severity)
    y = ztp_quantile(v, m.frequency)
    return x, y
