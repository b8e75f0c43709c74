"""Bivariate copula families used to couple claim size and claim count.

Gauss, Clayton, Gumbel and Frank copulas plus the independence copula.
For each family the module provides the distribution function ``C(u, v)``,
its first partial derivative ``D1(u, v) = dC/du`` (the h-function, i.e. the
conditional cdf of ``V`` given ``U = u``), its inverse in ``v``, the maps
between the dependence parameter and Kendall's tau, and a smooth bijection
of the parameter onto the real line for unconstrained optimization.

Clayton and Gumbel only reach non-negative tau. Negative tau is obtained by
the 90 degree rotation ``C~(u, v) = v - C(1 - u, v)`` whose h-function is
``D1(1 - u, v)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, optimize, special

#: u and v are clamped to ``[EPS, 1 - EPS]`` before h-function evaluation.
EPS = 1e-12

#: Frank parameters closer to zero than this are pushed out to +-FRANK_BAND.
FRANK_BAND = 1e-8

# bounds keeping the unconstrained search inside the numerically sane region
_G_BOUNDS = {
    "gauss": (-14.0, 14.0),
    "clayton": (-25.0, 6.0),
    "gumbel": (-25.0, 5.0),
    "frank": (-150.0, 150.0),
}


class CopulaFamily(str, Enum):
    GAUSS = "gauss"
    CLAYTON = "clayton"
    GUMBEL = "gumbel"
    FRANK = "frank"
    INDEPENDENCE = "independence"

    @classmethod
    def parse(cls, name) -> "CopulaFamily":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(f.value for f in cls)
            raise ValueError(f"unknown copula family {name!r}; expected one of {valid}") from None


#: The four parametric families (independence excluded).
FAMILIES = (CopulaFamily.GAUSS, CopulaFamily.CLAYTON, CopulaFamily.GUMBEL, CopulaFamily.FRANK)

ROTATABLE = (CopulaFamily.CLAYTON, CopulaFamily.GUMBEL)


@dataclass(frozen=True)
class CopulaSpec:
    """A copula family with its dependence parameter.

    Parameters
    ----------
    family : CopulaFamily or str
        One of ``gauss``, ``clayton``, ``gumbel``, ``frank``, ``independence``.
    theta : float
        Dependence parameter. Gauss: ``(-1, 1)``; Clayton: ``> 0``;
        Gumbel: ``>= 1``; Frank: nonzero. Ignored for independence.
    rotated : bool
        Use the 90 degree rotation (Clayton and Gumbel only), which turns the
        family's positive tau into ``-tau``.
    """

    family: CopulaFamily
    theta: float = 0.0
    rotated: bool = False

    def __post_init__(self):
        fam = CopulaFamily.parse(self.family)
        object.__setattr__(self, "family", fam)
        theta = float(self.theta)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "rotated", bool(self.rotated))
        if not math.isfinite(theta):
            raise ValueError("copula parameter must be finite")
        if fam is CopulaFamily.GAUSS and not -1.0 < theta < 1.0:
            raise ValueError(f"Gauss copula needs theta in (-1, 1), got {theta}")
        if fam is CopulaFamily.CLAYTON and not theta > 0.0:
            raise ValueError(f"Clayton copula needs theta > 0, got {theta}")
        if fam is CopulaFamily.GUMBEL and not theta >= 1.0:
            raise ValueError(f"Gumbel copula needs theta >= 1, got {theta}")
        if fam is CopulaFamily.FRANK and theta == 0.0:
            raise ValueError("Frank copula needs theta != 0")
        if fam is CopulaFamily.INDEPENDENCE:
            object.__setattr__(self, "theta", 0.0)
        if self.rotated and fam not in ROTATABLE:
            raise ValueError(f"rotation is only supported for Clayton and Gumbel, not {fam.value}")

    @property
    def tau(self) -> float:
        return theta_to_tau(self)

    @classmethod
    def independence(cls) -> "CopulaSpec":
        return cls(CopulaFamily.INDEPENDENCE, 0.0)


def _unit(x, name):
    x = np.asarray(x, dtype=float)
    if np.any(~((x >= 0.0) & (x <= 1.0))):
        raise ValueError(f"{name} must lie in [0, 1]")
    return x


def _clamp(x):
    return np.clip(x, EPS, 1.0 - EPS)


# --------------------------------------------------------------------------
# Gauss
# --------------------------------------------------------------------------

def _bvn_cdf(h, k, rho):
    """Standard bivariate normal cdf through Owen's T function."""
    h, k = np.broadcast_arrays(np.asarray(h, float), np.asarray(k, float))
    s = math.sqrt((1.0 - rho) * (1.0 + rho))
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = (k - rho * h) / (h * s)
        ak = (h - rho * k) / (k * s)
        beta = np.where((h * k > 0) | ((h * k == 0) & (h + k >= 0)), 0.0, 0.5)
        res = (0.5 * special.ndtr(h) + 0.5 * special.ndtr(k)
               - special.owens_t(h, ah) - special.owens_t(k, ak) - beta)
    r = rho / s
    res = np.where((h == 0) & (k != 0), 0.5 * special.ndtr(k) + special.owens_t(k, r), res)
    res = np.where((k == 0) & (h != 0), 0.5 * special.ndtr(h) + special.owens_t(h, r), res)
    res = np.where((h == 0) & (k == 0), 0.25 + math.asin(rho) / (2 * math.pi), res)
    return np.clip(res, 0.0, 1.0)


def _gauss_cdf(u, v, th):
    return _bvn_cdf(special.ndtri(u), special.ndtri(v), th)


def _gauss_h(u, v, th):
    s = math.sqrt((1.0 - th) * (1.0 + th))
    return special.ndtr((special.ndtri(v) - th * special.ndtri(u)) / s)


def _gauss_hinv(u, w, th):
    s = math.sqrt((1.0 - th) * (1.0 + th))
    return special.ndtr(special.ndtri(w) * s + th * special.ndtri(u))


# --------------------------------------------------------------------------
# Clayton
# --------------------------------------------------------------------------

def _clayton_logA(u, v, th):
    # ln(u^-th + v^-th - 1) without overflow or cancellation
    a = -th * np.log(u)
    b = -th * np.log(v)
    big = np.maximum(a, b) > 30.0
    with np.errstate(over="ignore"):
        small = np.log1p(np.expm1(np.minimum(a, 30.0)) + np.expm1(np.minimum(b, 30.0)))
    L = np.logaddexp(a, b)
    large = L + np.log1p(-np.exp(-L))
    return np.where(big, large, small)


def _clayton_cdf(u, v, th):
    return np.exp(-_clayton_logA(u, v, th) / th)


def _clayton_h(u, v, th):
    lA = _clayton_logA(u, v, th)
    return np.exp(-(1.0 + th) / th * lA - (1.0 + th) * np.log(u))


def _clayton_hinv(u, w, th):
    c = -th / (1.0 + th) * np.log(w)
    with np.errstate(divide="ignore"):
        t = -th * np.log(u) + np.log(np.expm1(c))
    return np.exp(-np.logaddexp(0.0, t) / th)


# --------------------------------------------------------------------------
# Gumbel
# --------------------------------------------------------------------------

def _gumbel_logA(x, y, th):
    return np.logaddexp(th * np.log(x), th * np.log(y)) / th


def _gumbel_cdf(u, v, th):
    x, y = -np.log(u), -np.log(v)
    return np.exp(-np.exp(_gumbel_logA(x, y, th)))


def _gumbel_h(u, v, th):
    x, y = -np.log(u), -np.log(v)
    lA = _gumbel_logA(x, y, th)
    return np.exp(-np.exp(lA) + (1.0 - th) * lA + (th - 1.0) * np.log(x) + x)


def _gumbel_hinv(u, w, th, maxiter=100):
    # h = w  <=>  z + (th-1) ln z = target  with z = A(x, y) >= x.
    # The left side is increasing and concave, so Newton iterates started at
    # z = x increase monotonically to the root.
    x = -np.log(u)
    target = x + (th - 1.0) * np.log(x) - np.log(w)
    z = np.array(x, dtype=float, copy=True)
    for _ in range(maxiter):
        f = z + (th - 1.0) * np.log(z) - target
        step = f / (1.0 + (th - 1.0) / z)
        z = np.maximum(z - step, x)
        if np.all(np.abs(step) <= 1e-15 * np.maximum(z, 1.0)):
            break
    # y^th = z^th - x^th, in logs
    ly = np.log(z) + np.log1p(-np.exp(th * (np.log(x) - np.log(z)))) / th
    return np.exp(-np.exp(ly))


# --------------------------------------------------------------------------
# Frank (positive theta; negative theta via C_{-t}(u, v) = u - C_t(u, 1 - v))
# --------------------------------------------------------------------------

def _om(x):
    # 1 - exp(-x) for x >= 0
    return -np.expm1(-x)


def _frank_cdf_pos(u, v, th):
    a, b = np.minimum(u, v), np.maximum(u, v)
    bracket = _om(th * b) + np.exp(-th * (b - a)) * _om(th * (1.0 - b))
    return a - (np.log(bracket) - math.log(_om(th))) / th


def _frank_h_pos(u, v, th):
    with np.errstate(divide="ignore"):
        z = th * (u - v) + np.log(_om(th * (1.0 - v))) - np.log(_om(th * v))
    return special.expit(-z)


def _frank_hinv_pos(u, w, th):
    e = np.exp(-th * u)
    denom = e / w - np.expm1(-th * u)
    return np.clip(-np.log1p(np.expm1(-th) / denom) / th, 0.0, 1.0)


def _frank_cdf(u, v, th):
    if th > 0:
        return _frank_cdf_pos(u, v, th)
    return u - _frank_cdf_pos(u, 1.0 - v, -th)


def _frank_h(u, v, th):
    if th > 0:
        return _frank_h_pos(u, v, th)
    return 1.0 - _frank_h_pos(u, 1.0 - v, -th)


def _frank_hinv(u, w, th):
    if th > 0:
        return _frank_hinv_pos(u, w, th)
    return 1.0 - _frank_hinv_pos(u, 1.0 - w, -th)


_CDF = {
    CopulaFamily.GAUSS: _gauss_cdf,
    CopulaFamily.CLAYTON: _clayton_cdf,
    CopulaFamily.GUMBEL: _gumbel_cdf,
    CopulaFamily.FRANK: _frank_cdf,
    CopulaFamily.INDEPENDENCE: lambda u, v, th: u * v,
}
_H = {
    CopulaFamily.GAUSS: _gauss_h,
    CopulaFamily.CLAYTON: _clayton_h,
    CopulaFamily.GUMBEL: _gumbel_h,
    CopulaFamily.FRANK: _frank_h,
    CopulaFamily.INDEPENDENCE: lambda u, v, th: v,
}
_HINV = {
    CopulaFamily.GAUSS: _gauss_hinv,
    CopulaFamily.CLAYTON: _clayton_hinv,
    CopulaFamily.GUMBEL: _gumbel_hinv,
    CopulaFamily.FRANK: _frank_hinv,
    CopulaFamily.INDEPENDENCE: lambda u, w, th: w,
}


def _base_cdf(u, v, spec):
    if spec.family is CopulaFamily.GAUSS and spec.theta == 0.0:
        return u * v
    return _CDF[spec.family](u, v, spec.theta)


def _base_h(u, v, spec):
    if spec.family is CopulaFamily.GAUSS and spec.theta == 0.0:
        return np.broadcast_to(v, np.broadcast(u, v).shape).copy()
    return _H[spec.family](u, v, spec.theta)


def copula_cdf(u, v, spec: CopulaSpec):
    """Copula distribution function ``C(u, v)``.

    Exact boundary values ``C(u, 0) = C(0, v) = 0``, ``C(u, 1) = u`` and
    ``C(1, v) = v`` are enforced.

    Raises
    ------
    ValueError
        If ``u`` or ``v`` lies outside ``[0, 1]``.
    """
    u = _unit(u, "u")
    v = _unit(v, "v")
    uc, vc = _clamp(u), _clamp(v)
    if spec.rotated:
        c = vc - _base_cdf(1.0 - uc, vc, spec)
    else:
        c = _base_cdf(uc, vc, spec)
    c = np.clip(c, 0.0, np.minimum(uc, vc))
    c = np.where(v >= 1.0, u, np.where(u >= 1.0, v, c))
    return np.where((u <= 0.0) | (v <= 0.0), 0.0, c)


def h_function(u, v, spec: CopulaSpec):
    """First partial derivative ``D1(u, v) = dC(u, v)/du``.

    ``D1(u, 0) = 0`` and ``D1(u, 1) = 1`` exactly; interior arguments are
    clamped to ``[EPS, 1 - EPS]`` where the closed forms are singular.
    """
    u = _unit(u, "u")
    v = _unit(v, "v")
    uc, vc = _clamp(u), _clamp(v)
    if spec.rotated:
        uc = 1.0 - uc
    h = np.clip(_base_h(uc, vc, spec), 0.0, 1.0)
    return np.where(v <= 0.0, 0.0, np.where(v >= 1.0, 1.0, h))


def h_inverse(u, w, spec: CopulaSpec):
    """Solve ``D1(u, v) = w`` for ``v``."""
    u = _clamp(_unit(u, "u"))
    w = _clamp(_unit(w, "w"))
    if spec.rotated:
        u = 1.0 - u
    if spec.family is CopulaFamily.GAUSS and spec.theta == 0.0:
        return np.broadcast_to(w, np.broadcast(u, w).shape).copy()
    return np.clip(_HINV[spec.family](u, w, spec.theta), 0.0, 1.0)


def copula_sample(spec: CopulaSpec, rng: np.random.Generator, size=None):
    """Draw ``(U, V)`` pairs by conditional inversion ``V = D1^{-1}(U, W)``."""
    u = rng.random(size)
    w = rng.random(size)
    return u, h_inverse(u, w, spec)


# --------------------------------------------------------------------------
# Kendall's tau
# --------------------------------------------------------------------------

def debye1(x: float) -> float:
    """First Debye function ``D1(x) = (1/x) int_0^x t/(e^t - 1) dt``."""
    x = float(x)
    if abs(x) < 1e-3:
        return 1.0 - x / 4.0 + x * x / 36.0 - x**4 / 3600.0

    def integrand(t):
        return t / math.expm1(t) if t != 0.0 else 1.0

    val, _ = integrate.quad(integrand, 0.0, x, epsabs=0.0, epsrel=1e-13, limit=200)
    return val / x


def _frank_tau(theta: float) -> float:
    if abs(theta) < 1e-3:
        return theta / 9.0 - theta**3 / 900.0 + theta**5 / 52920.0
    return 1.0 - 4.0 / theta * (1.0 - debye1(theta))


def theta_to_tau(spec: CopulaSpec) -> float:
    """Kendall's tau of a copula spec; the sign is flipped for rotated specs."""
    th = spec.theta
    fam = spec.family
    if fam is CopulaFamily.GAUSS:
        tau = 2.0 / math.pi * math.asin(th)
    elif fam is CopulaFamily.CLAYTON:
        tau = th / (th + 2.0)
    elif fam is CopulaFamily.GUMBEL:
        tau = (th - 1.0) / th
    elif fam is CopulaFamily.FRANK:
        tau = _frank_tau(th)
    else:
        tau = 0.0
    return -tau if spec.rotated else tau


def tau_to_theta(tau: float, family) -> CopulaSpec:
    """Copula spec with the requested Kendall's tau.

    Negative tau for Clayton and Gumbel yields a rotated spec whose parameter
    is computed from ``|tau|``.

    Raises
    ------
    ValueError
        If ``tau`` is not attainable by the family (``|tau| >= 1``, ``tau = 0``
        for Clayton and Frank, ``tau != 0`` for independence).
    """
    fam = CopulaFamily.parse(family)
    tau = float(tau)
    if not -1.0 < tau < 1.0:
        raise ValueError(f"Kendall's tau must lie in (-1, 1), got {tau}")
    if fam is CopulaFamily.INDEPENDENCE:
        if tau != 0.0:
            raise ValueError("independence copula only attains tau = 0")
        return CopulaSpec.independence()
    if fam is CopulaFamily.GAUSS:
        return CopulaSpec(fam, math.sin(math.pi * tau / 2.0))
    if fam in ROTATABLE:
        rotated = tau < 0
        t = abs(tau)
        if fam is CopulaFamily.CLAYTON:
            if t == 0.0:
                raise ValueError("Clayton copula cannot attain tau = 0")
            return CopulaSpec(fam, 2.0 * t / (1.0 - t), rotated)
        return CopulaSpec(fam, 1.0 / (1.0 - t), rotated and t > 0)
    # Frank: tau(theta) is odd and increasing
    if tau == 0.0:
        raise ValueError("Frank copula cannot attain tau = 0")
    t = abs(tau)
    hi = 10.0
    while _frank_tau(hi) < t:
        hi *= 2.0
    th = optimize.brentq(lambda s: _frank_tau(s) - t, 1e-12, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    return CopulaSpec(fam, math.copysign(th, tau))


# --------------------------------------------------------------------------
# Unconstrained parameterization
# --------------------------------------------------------------------------

def unconstrain(spec: CopulaSpec) -> float:
    """Map the copula parameter onto the real line.

    Gauss: Fisher z ``atanh(theta)``; Clayton: ``ln theta``; Gumbel:
    ``ln(theta - 1)``; Frank: identity.
    """
    th = spec.theta
    fam = spec.family
    if fam is CopulaFamily.GAUSS:
        return math.atanh(th)
    if fam is CopulaFamily.CLAYTON:
        return math.log(th)
    if fam is CopulaFamily.GUMBEL:
        return math.log(th - 1.0) if th > 1.0 else _G_BOUNDS["gumbel"][0]
    if fam is CopulaFamily.FRANK:
        return th
    return 0.0


def constrain(g: float, family, rotated: bool = False) -> CopulaSpec:
    """Inverse of :func:`unconstrain`.

    ``g`` is clipped to a family-specific window that keeps the closed forms
    finite in double precision.
    """
    fam = CopulaFamily.parse(family)
    if fam is CopulaFamily.INDEPENDENCE:
        return CopulaSpec.independence()
    lo, hi = _G_BOUNDS[fam.value]
    g = min(max(float(g), lo), hi)
    if fam is CopulaFamily.GAUSS:
        th = math.tanh(g)
    elif fam is CopulaFamily.CLAYTON:
        th = math.exp(g)
    elif fam is CopulaFamily.GUMBEL:
        th = 1.0 + math.exp(g)
    else:
        th = g if abs(g) >= FRANK_BAND else math.copysign(FRANK_BAND, g if g != 0 else 1.0)
    return CopulaSpec(fam, th, rotated)


def dtheta_dg(g: float, family) -> float:
    """Derivative of the constrained parameter with respect to ``g``."""
    fam = CopulaFamily.parse(family)
    if fam is CopulaFamily.GAUSS:
        return 1.0 - math.tanh(g) ** 2
    if fam in ROTATABLE:
        return math.exp(g)
    return 1.0 if fam is CopulaFamily.FRANK else 0.0


def dtau_dtheta(spec: CopulaSpec, h: float = 1e-6) -> float:
    """Derivative of Kendall's tau in the copula parameter (sign follows rotation)."""
    sign = -1.0 if spec.rotated else 1.0
    th = spec.theta
    fam = spec.family
    if fam is CopulaFamily.GAUSS:
        return sign * 2.0 / (math.pi * math.sqrt(1.0 - th * th))
    if fam is CopulaFamily.CLAYTON:
        return sign * 2.0 / (th + 2.0) ** 2
    if fam is CopulaFamily.GUMBEL:
        return sign / th**2
    if fam is CopulaFamily.FRANK:
        step = h * max(1.0, abs(th))
        return (_frank_tau(th + step) - _frank_tau(th - step)) / (2.0 * step)
    return 0.0
