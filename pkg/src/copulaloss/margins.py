"""Gamma severity and zero-truncated Poisson frequency margins.

The Gamma law is parameterized by its mean ``mu`` and dispersion ``delta``
(shape ``1/delta``, scale ``mu*delta``), so that ``Var(X) = mu**2 * delta``.
The zero-truncated Poisson (ZTP) law is the Poisson law with intensity
``lam`` conditioned on at least one event.

All evaluation functions broadcast over numpy arrays, including array-valued
parameters, which is what the regression code relies on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

ArrayLike = np.ndarray | float

#: Tail mass allowed beyond the last ZTP atom kept in truncated sums.
ZTP_TAIL_TOL = 1e-12


@dataclass(frozen=True)
class GammaParams:
    """Gamma distribution with mean ``mu`` and dispersion ``delta``."""

    mu: ArrayLike
    delta: ArrayLike

    def __post_init__(self):
        if not (np.all(np.asarray(self.mu) > 0) and np.all(np.isfinite(self.mu))):
            raise ValueError("Gamma mean mu must be positive and finite")
        if not (np.all(np.asarray(self.delta) > 0) and np.all(np.isfinite(self.delta))):
            raise ValueError("Gamma dispersion delta must be positive and finite")

    @property
    def shape(self):
        return 1.0 / np.asarray(self.delta, dtype=float)

    @property
    def scale(self):
        return np.asarray(self.mu, dtype=float) * np.asarray(self.delta, dtype=float)


@dataclass(frozen=True)
class ZtpParams:
    """Zero-truncated Poisson distribution with pre-truncation intensity ``lam``."""

    lam: ArrayLike

    def __post_init__(self):
        if not (np.all(np.asarray(self.lam) > 0) and np.all(np.isfinite(self.lam))):
            raise ValueError("ZTP intensity lam must be positive and finite")


def _positive(x, name="x"):
    x = np.asarray(x, dtype=float)
    if np.any(~(x > 0)):
        raise ValueError(f"{name} must be strictly positive")
    return x


# --------------------------------------------------------------------------
# Gamma
# --------------------------------------------------------------------------

def gamma_logpdf(x, p: GammaParams):
    x = _positive(x)
    k = p.shape
    scale = p.scale
    z = x / scale
    return k * np.log(z) - z - np.log(x) - special.gammaln(k)


def gamma_pdf(x, p: GammaParams):
    """Density of the Gamma law with shape ``1/delta`` and scale ``mu*delta``.

    Raises
    ------
    ValueError
        If any ``x <= 0``.
    """
    return np.exp(gamma_logpdf(x, p))


def gamma_cdf(x, p: GammaParams):
    """Regularized lower incomplete gamma function at ``x/(mu*delta)``.

    ``x <= 0`` maps to 0 and ``x = inf`` to 1.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("x must not be NaN")
    z = np.maximum(x, 0.0) / p.scale
    return special.gammainc(p.shape, z)


def gamma_sf(x, p: GammaParams):
    x = np.asarray(x, dtype=float)
    z = np.maximum(x, 0.0) / p.scale
    return special.gammaincc(p.shape, z)


def gamma_quantile(q, p: GammaParams):
    """Inverse of :func:`gamma_cdf` for ``0 < q < 1``."""
    q = np.asarray(q, dtype=float)
    if np.any(~((q > 0) & (q < 1))):
        raise ValueError("quantile level must lie in (0, 1)")
    return special.gammaincinv(p.shape, q) * p.scale


def gamma_sample(p: GammaParams, rng: np.random.Generator, size=None):
    return rng.gamma(p.shape, p.scale, size=size)


def gamma_mean_var(p: GammaParams):
    mu = np.asarray(p.mu, dtype=float)
    return mu, mu**2 * np.asarray(p.delta, dtype=float)


# --------------------------------------------------------------------------
# Zero-truncated Poisson
# --------------------------------------------------------------------------

def _log_norm(lam):
    # ln(1 - exp(-lam)), accurate for small lam
    return np.log(-np.expm1(-lam))


def ztp_logpmf(y, p: ZtpParams):
    y = np.asarray(y)
    if np.any(y < 1) or np.any(np.asarray(y, dtype=float) % 1 != 0):
        raise ValueError("ZTP support is the positive integers")
    lam = np.asarray(p.lam, dtype=float)
    return y * np.log(lam) - lam - special.gammaln(y + 1.0) - _log_norm(lam)


def ztp_pmf(y, p: ZtpParams):
    """Probability mass ``lam**y exp(-lam) / (y! (1 - exp(-lam)))`` for ``y >= 1``."""
    return np.exp(ztp_logpmf(y, p))


def ztp_sf(y, p: ZtpParams):
    """Upper tail ``P(Y > y)``; equals 1 for ``y < 1``."""
    y = np.floor(np.asarray(y, dtype=float))
    lam = np.asarray(p.lam, dtype=float)
    out = special.pdtrc(np.maximum(y, 0.0), lam) / -np.expm1(-lam)
    return np.where(y < 1, 1.0, np.minimum(out, 1.0))


def ztp_cdf(y, p: ZtpParams):
    """``P(Y <= y)`` with the convention ``F(0) = 0``.

    Non-integer ``y`` is floored; values below 1 give 0.
    """
    y = np.floor(np.asarray(y, dtype=float))
    lam = np.asarray(p.lam, dtype=float)
    yy = np.maximum(y, 0.0)
    norm = -np.expm1(-lam)
    # lower form loses at most a factor 2 to cancellation when lam > 1;
    # for lam <= 1 the cdf is >= 0.58 and the upper form is accurate
    lower = (special.pdtr(yy, lam) - np.exp(-lam)) / norm
    upper = 1.0 - special.pdtrc(yy, lam) / norm
    out = np.where(lam > 1.0, lower, upper)
    return np.where(y < 1, 0.0, np.clip(out, 0.0, 1.0))


def ztp_upper_bound(p: ZtpParams, tol: float = ZTP_TAIL_TOL) -> int:
    """Smallest ``y`` with ``1 - F(y) < tol`` (maximum over array-valued ``lam``)."""
    lam = float(np.max(p.lam))
    y = max(1, int(lam + 10.0 * np.sqrt(lam)))
    while ztp_sf(y, ZtpParams(lam)) >= tol:
        y += max(1, int(np.sqrt(lam)))
    while y > 1 and ztp_sf(y - 1, ZtpParams(lam)) < tol:
        y -= 1
    return y


def ztp_quantile(q, p: ZtpParams):
    """Smallest ``y >= 1`` with ``F(y) >= q``, vectorized over ``q`` and ``lam``."""
    q = np.asarray(q, dtype=float)
    if np.any((q < 0) | (q > 1)):
        raise ValueError("quantile level must lie in [0, 1]")
    lam = np.broadcast_to(np.asarray(p.lam, dtype=float), np.broadcast(q, p.lam).shape)
    q = np.broadcast_to(q, lam.shape)
    y = np.ones(lam.shape)
    cdf = ztp_cdf(y, ZtpParams(lam))
    active = cdf < q
    cap = ztp_upper_bound(ZtpParams(lam), tol=1e-16) + 1
    while np.any(active) and y.max() < cap:
        y = y + active
        cdf = np.where(active, ztp_cdf(y, ZtpParams(lam)), cdf)
        active = cdf < q
    return y.astype(np.int64)


def ztp_sample(p: ZtpParams, rng: np.random.Generator, size=None):
    """Draw ZTP variates.

    Rejection from the Poisson law (zeros redrawn) for ``lam >= 0.5``,
    inverse-cdf lookup below, where rejection wastes most draws.
    """
    lam = np.asarray(p.lam, dtype=float)
    shape = lam.shape if size is None else tuple(np.atleast_1d(size))
    lam = np.broadcast_to(lam, shape)
    out = np.empty(shape, dtype=np.int64)
    big = lam >= 0.5
    if np.any(big):
        lb = lam[big]
        draw = rng.poisson(lb)
        zero = draw == 0
        while np.any(zero):
            draw[zero] = rng.poisson(lb[zero])
            zero = draw == 0
        out[big] = draw
    if np.any(~big):
        ls = lam[~big]
        out[~big] = ztp_quantile(rng.random(ls.shape), ZtpParams(ls))
    if size is None and out.shape == ():
        return int(out)
    return out


def ztp_mean_var(p: ZtpParams):
    lam = np.asarray(p.lam, dtype=float)
    norm = -np.expm1(-lam)
    mean = lam / norm
    var = lam * (1.0 - np.exp(-lam) * (lam + 1.0)) / norm**2
    return mean, var
