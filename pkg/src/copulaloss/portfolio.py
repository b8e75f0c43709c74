"""Total loss of a portfolio of independent policies.

The total ``T = sum_i L_i`` is approximated by ``N(sum mu_Li, sum sigma_Li^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .joint import JointModel
from .loss import LossDistribution, QuadratureError, loss_mean, loss_variance, policy_moments


@dataclass(frozen=True)
class TotalLossEstimate:
    mean: float
    sd: float
    n: int

    @property
    def variance(self) -> float:
        return self.sd**2

    def quantile(self, q: float) -> float:
        return total_loss_quantile(self, q)

    def __add__(self, other: "TotalLossEstimate") -> "TotalLossEstimate":
        return TotalLossEstimate(self.mean + other.mean, math.sqrt(self.variance + other.variance), self.n + other.n)


def _policy_models(models):
    if isinstance(models, JointModel):
        mu = np.atleast_1d(np.asarray(models.severity.mu, dtype=float))
        lam = np.atleast_1d(np.asarray(models.frequency.lam, dtype=float))
        delta = np.atleast_1d(np.asarray(models.severity.delta, dtype=float))
        mu, lam, delta = np.broadcast_arrays(mu, lam, delta)
        return [JointModel.from_params(m, d, l, models.copula) for m, d, l in zip(mu, delta, lam)]
    return list(models)


def policy_loss_moments(models, method: str = "batched"):
    """Per-policy loss means and variances.

    Parameters
    ----------
    models : JointModel or sequence of JointModel
        A vectorized model (one entry per policy) or a list of scalar models.
    method : {"batched", "quadrature"}
        ``"batched"`` evaluates all policies sharing ``delta`` and the copula
        on a fixed Gauss-Legendre rule; ``"quadrature"`` runs the adaptive
        per-policy integrals.
    """
    if method == "batched" and isinstance(models, JointModel) and np.ndim(models.severity.delta) == 0:
        return policy_moments(models.severity.mu, float(models.severity.delta), models.frequency.lam, models.copula)
    if method not in ("batched", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    pol = _policy_models(models)
    if method == "batched":
        out = [policy_moments(m.severity.mu, float(m.severity.delta), m.frequency.lam, m.copula) for m in pol]
        return np.concatenate([o[0] for o in out]), np.concatenate([o[1] for o in out])
    means = np.empty(len(pol))
    vars_ = np.empty(len(pol))
    for i, m in enumerate(pol):
        try:
            d = LossDistribution(m)
            means[i] = loss_mean(d)
            vars_[i] = loss_variance(d, means[i])
        except QuadratureError as exc:
            raise QuadratureError(f"policy {i}: {exc}") from exc
    return means, vars_


def total_loss(models, method: str = "batched") -> TotalLossEstimate:
    """Normal approximation to the portfolio total loss."""
    means, vars_ = policy_loss_moments(models, method)
    if means.size == 0:
        raise ValueError("empty portfolio")
    return TotalLossEstimate(float(np.sum(means)), float(math.sqrt(np.sum(vars_))), int(means.size))


def total_loss_quantile(est: TotalLossEstimate, q: float) -> float:
    """``mean + sd * Phi^{-1}(q)``."""
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")
    if q == 0.5:
        return est.mean
    return est.mean + est.sd * float(stats.norm.ppf(q))
