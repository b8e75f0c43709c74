"""Quasi-Newton maximization and finite-difference derivatives."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize


@dataclass
class OptimResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    converged: bool
    message: str


def central_gradient(f, x, rel_step=6e-6):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for j in range(x.size):
        h = rel_step * max(1.0, abs(x[j]))
        xp = x.copy()
        xm = x.copy()
        xp[j] += h
        xm[j] -= h
        g[j] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def numerical_hessian(f, x, steps=None):
    """Central finite-difference Hessian.

    The default step for coordinate ``j`` is ``max(1e-5, 1e-5 * |x_j|)``.
    The result is symmetrized.
    """
    x = np.asarray(x, dtype=float)
    k = x.size
    if steps is None:
        steps = np.maximum(1e-5, 1e-5 * np.abs(x))
    h = np.asarray(steps, dtype=float)
    f0 = f(x)
    H = np.empty((k, k))
    e = np.eye(k) * h
    for i in range(k):
        fp = f(x + e[i])
        fm = f(x - e[i])
        H[i, i] = (fp - 2.0 * f0 + fm) / h[i] ** 2
        for j in range(i):
            fpp = f(x + e[i] + e[j])
            fpm = f(x + e[i] - e[j])
            fmp = f(x - e[i] + e[j])
            fmm = f(x - e[i] - e[j])
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    return H


def bfgs_maximize(f, x0, grad=None, *, gtol=1e-6, ftol=1e-10, maxiter=500):
    """Maximize ``f`` by BFGS with a strong-Wolfe line search.

    Stops when the gradient max-norm falls below ``gtol`` or the relative
    change of ``f`` over an accepted step falls below ``ftol``.
    """
    def nf(z):
        return -f(z)

    if grad is None:
        def ng(z):
            return -central_gradient(f, z)
    else:
        def ng(z):
            return -np.asarray(grad(z), dtype=float)

    x = np.array(x0, dtype=float)
    fx = nf(x)
    g = ng(x)
    n = x.size
    Hinv = np.eye(n)
    # scale the first step so it does not leap out of the sane region
    gnorm = np.max(np.abs(g))
    if gnorm > 0:
        Hinv *= min(1.0, 1.0 / gnorm)
    message = "maximum iterations reached"
    converged = False
    it = 0
    for it in range(1, maxiter + 1):
        if np.max(np.abs(g)) < gtol:
            converged, message = True, "gradient below tolerance"
            it -= 1
            break
        p = -Hinv @ g
        if g @ p >= 0:
            Hinv = np.eye(n) / max(1.0, np.max(np.abs(g)))
            p = -Hinv @ g
        with warnings.catch_warnings():
            warnings.filterwarnings("ignore", message="The line search algorithm")
            alpha, _, _, f_new, _, g_new = optimize.line_search(nf, ng, x, p, gfk=g, old_fval=fx, maxiter=30)
        if alpha is None:
            # Armijo backtracking fallback
            alpha = 1.0
            slope = g @ p
            while alpha > 1e-12:
                f_new = nf(x + alpha * p)
                if np.isfinite(f_new) and f_new <= fx + 1e-4 * alpha * slope:
                    break
                alpha *= 0.5
            else:
                converged = np.max(np.abs(g)) < 1e3 * gtol
                message = "line search failed"
                break
            g_new = ng(x + alpha * p)
        if g_new is None:
            g_new = ng(x + alpha * p)
        s = alpha * p
        x_new = x + s
        yk = g_new - g
        rel = abs(fx - f_new) / max(abs(fx), abs(f_new), 1.0)
        x, g = x_new, g_new
        fx_old, fx = fx, f_new
        sy = s @ yk
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(yk):
            rho = 1.0 / sy
            Hy = Hinv @ yk
            Hinv = (Hinv - rho * (np.outer(s, Hy) + np.outer(Hy, s))
                    + (rho * rho * (yk @ Hy) + rho) * np.outer(s, s))
        if np.max(np.abs(g)) < gtol:
            converged, message = True, "gradient below tolerance"
            break
        if rel < ftol and fx <= fx_old:
            converged, message = True, "relative change below tolerance"
            break
    return OptimResult(x=x, fun=-fx, grad=-g, iterations=it, converged=converged, message=message)


def newton_polish(f, x, *, gtol=1e-6, maxiter=5):
    """Refine a near-optimum with Newton steps on finite-difference derivatives.

    Near the optimum the change in ``f`` over a step drops below rounding
    level, so line searches on ``f`` stall; these steps only require the
    gradient max-norm to shrink. Returns ``(x, grad, steps_taken)``.
    """
    x = np.array(x, dtype=float)
    g = central_gradient(f, x)
    taken = 0
    for _ in range(maxiter):
        if np.max(np.abs(g)) < gtol:
            break
        H = numerical_hessian(f, x)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            break
        x_new = x - step
        g_new = central_gradient(f, x_new)
        if not np.max(np.abs(g_new)) < np.max(np.abs(g)):
            break
        x, g = x_new, g_new
        taken += 1
    return x, g, taken
