"""Choosing among copula families: Vuong test and AIC."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


class DegenerateVarianceError(ValueError):
    """All pointwise loglikelihood differences are equal."""


@dataclass(frozen=True)
class VuongResult:
    statistic: float
    preferred: str  # "model1", "model2" or "undecided"
    level: float
    mean_diff: float
    n: int


def vuong_test(l1, l2, level: float = 0.05, dof1: int = 0, dof2: int = 0) -> VuongResult:
    """Vuong test for two non-nested models fitted to the same rows.

    With ``m_i = l1_i - l2_i`` the statistic is
    ``sqrt(n) * mbar / sd(m)`` where ``sd`` uses divisor ``n``. When the
    parameter counts differ, ``mbar`` is replaced by
    ``mbar - (dof1 - dof2) ln(n) / (2n)``.

    Parameters
    ----------
    l1, l2 : array_like
        Pointwise loglikelihoods of the two models.
    level : float
        Two-sided significance level.
    """
    l1 = np.asarray(l1, dtype=float)
    l2 = np.asarray(l2, dtype=float)
    if l1.shape != l2.shape or l1.ndim != 1:
        raise ValueError("pointwise loglikelihood vectors must be 1-D and of equal length")
    n = l1.size
    if n < 2:
        raise ValueError("need at least two observations")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    m = l1 - l2
    mbar = float(np.mean(m))
    sd = float(np.sqrt(np.mean((m - mbar) ** 2)))
    if not sd > 0.0 or sd <= 1e-14 * max(1.0, float(np.max(np.abs(m)))):
        raise DegenerateVarianceError("pointwise loglikelihood differences have zero variance")
    if dof1 != dof2:
        mbar -= (dof1 - dof2) * math.log(n) / (2.0 * n)
    t = math.sqrt(n) * mbar / sd
    crit = stats.norm.ppf(1.0 - level / 2.0)
    if t > crit:
        pref = "model1"
    elif t < -crit:
        pref = "model2"
    else:
        pref = "undecided"
    return VuongResult(t, pref, level, mbar, n)


def aic(fit) -> float:
    """``-2 loglik + 2 dof`` of a fit result."""
    return -2.0 * fit.loglik + 2.0 * fit.dof


def _label(fit) -> str:
    name = fit.family.value
    return f"{name}-rotated" if getattr(fit, "rotated", False) else name


def pairwise_vuong(fits, level: float = 0.05):
    """Vuong tests for every pair of fits.

    Returns rows with keys ``model1``, ``model2``, ``statistic`` and
    ``preferred``; ``preferred`` holds the winning family name or
    ``"undecided"``. A pair with identical pointwise loglikelihoods yields
    ``statistic = nan`` and ``preferred = "degenerate"``.
    """
    rows = []
    for i in range(len(fits)):
        for j in range(i + 1, len(fits)):
            a, b = fits[i], fits[j]
            try:
                r = vuong_test(a.pointwise_loglik, b.pointwise_loglik, level, a.dof, b.dof)
            except DegenerateVarianceError:
                rows.append({"model1": _label(a), "model2": _label(b), "statistic": float("nan"),
                             "preferred": "degenerate"})
                continue
            pref = {"model1": _label(a), "model2": _label(b)}.get(r.preferred, "undecided")
            rows.append({"model1": _label(a), "model2": _label(b), "statistic": r.statistic, "preferred": pref})
    return rows


def aic_ranking(fits):
    """Rows ``(rank, family, loglik, dof, aic)`` sorted by increasing AIC."""
    order = sorted(fits, key=aic)
    return [
        {"rank": k + 1, "family": _label(f), "loglik": f.loglik, "dof": f.dof, "aic": aic(f)}
        for k, f in enumerate(order)
    ]
