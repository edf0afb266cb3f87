"""Optimal transmission ratio and large-network scaling of the capacity.

With ``gamma = (1 - alpha) / alpha`` the relay part of the capacity is
``1 / g(gamma)`` times the relay opportunity mass, where

    g(gamma) = (1 + gamma) * (1 + C_B / h(gamma)),
    h(gamma) = sum_{i < B} C_i * gamma**(B - i).

``g`` is minimised by golden-section search on an expanding bracket to the
right of ``gamma = 1`` (``g`` decreases on ``(0, 1]``).  Golden section can
only place a flat minimum to about the square root of machine precision,
so the final bracket is polished by bisection on ``g'``, whose numerator is
the stationarity condition ``h (h + C_B) - (1 + gamma) C_B h'``.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .capacity import throughput_capacity
from .errors import DomainError, SolverError
from .scheduling import (
    GtsGeometry,
    LtsGeometry,
    gts_contact_probabilities,
    gts_transmission_probabilities,
    lts_contact_probabilities,
    lts_transmission_probabilities,
)

log = logging.getLogger(__name__)

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OptimizationResult:
    gamma_star: float
    alpha_star: float
    t_c_star: float
    residual: float


def _log_c(n, i):
    i = np.asarray(i, dtype=float)
    return gammaln(n - 2 + i) - gammaln(i + 1) - gammaln(n - 2)


def _check(n, B):
    if int(n) != n or n < 4:
        raise DomainError(f"n={n} must be an integer >= 4")
    if int(B) != B or B < 1:
        raise DomainError(f"B={B} must be an integer >= 1")


@functools.lru_cache(maxsize=256)
def _log_coefficients(n, B):
    """log C_0 .. log C_B and the exponents B - i of h's terms (read-only)."""
    logc = _log_c(n, np.arange(B + 1))
    powers = (B - np.arange(B)).astype(float)
    logc.setflags(write=False)
    powers.setflags(write=False)
    return logc, powers


def _h_terms(gamma, n, B):
    """Log of each term C_i * gamma**(B - i), i < B, plus the exponents B - i."""
    logc, powers = _log_coefficients(n, B)
    return logc[:-1] + powers * math.log(gamma), powers


def _log_h(terms):
    top = terms.max()
    w = np.exp(terms - top)
    total = w.sum()
    return top + math.log(total), w / total


def h_poly(gamma: float, n: int, B: int) -> tuple[float, float]:
    """Value and derivative of h at ``gamma``.

    Terms are combined in log space; the returned floats overflow to inf only
    if the polynomial itself exceeds the double range.
    """
    _check(n, B)
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    terms, powers = _h_terms(gamma, n, B)
    value = math.exp(logsumexp(terms))
    deriv = math.exp(logsumexp(terms, b=powers)) / gamma
    return value, deriv


def _ratios(gamma, n, B):
    """Return (C_B / h, h' / h), both finite for any B."""
    terms, powers = _h_terms(gamma, n, B)
    log_h, w = _log_h(terms)
    logc, _ = _log_coefficients(n, B)
    u = math.exp(float(logc[-1]) - log_h)
    v = float(np.dot(w, powers)) / gamma
    return u, v


def objective(gamma: float, n: int, B: int) -> float:
    """g(gamma) = (1 + gamma)(1 + C_B / h(gamma))."""
    u, _ = _ratios(gamma, n, B)
    return (1.0 + gamma) * (1.0 + u)


def stationarity_residual(gamma: float, n: int, B: int) -> float:
    """``[h (h + C_B) - (1 + gamma) C_B h'] / h**2``, which is also g'(gamma)."""
    u, v = _ratios(gamma, n, B)
    return 1.0 + u - (1.0 + gamma) * u * v


def _golden(f, a, b, tol):
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol * max(1.0, abs(a)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return a, b


def solve_gamma_star(n: int, B: int, tol: float = 1e-12, max_doublings: int = 64) -> float:
    _check(n, B)
    g = lambda x: objective(x, n, B)
    lo, hi = 1.0, 4.0
    g_prev = g(hi / 2)
    doublings = 0
    while g(hi) <= g_prev:
        if doublings >= max_doublings:
            raise SolverError("bracket expansion failed: g keeps decreasing")
        lo, g_prev = hi / 2, g(hi)
        hi *= 2.0
        doublings += 1
    a, b = _golden(g, lo, hi, tol)

    # Polish on the sign change of g' inside a slightly widened golden bracket.
    r = lambda x: stationarity_residual(x, n, B)
    step = 1e-7 * b
    lo = max(1.0, a - step)
    while r(lo) > 0 and lo > 1.0:
        step *= 2.0
        lo = max(1.0, lo - step)
    step = 1e-7 * b
    hi = b + step
    while r(hi) < 0:
        step *= 2.0
        hi += step
    if r(lo) > 0:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if r(mid) < 0:
            lo = mid
        else:
            hi = mid
    return lo if abs(r(lo)) <= abs(r(hi)) else hi


def _scheme_parts(scheme, geometry):
    """(direct term, relay opportunity mass, probs factory) for a scheme."""
    scheme = scheme.upper()
    if scheme == "LTS":
        if not isinstance(geometry, LtsGeometry):
            raise DomainError("LTS needs an LtsGeometry")
        p0, p1 = lts_contact_probabilities(geometry)
        return p1 / geometry.d, (p0 - p1) / geometry.d, lambda a: lts_transmission_probabilities(geometry, a)
    if scheme == "GTS":
        if not isinstance(geometry, GtsGeometry):
            raise DomainError("GTS needs a GtsGeometry")
        p3, p4 = gts_contact_probabilities(geometry)
        scale = geometry.J / geometry.n
        return scale * p4, scale * (p3 - p4), lambda a: gts_transmission_probabilities(geometry, a)
    raise DomainError(f"unknown scheme {scheme!r}")


def capacity_vs_alpha(scheme, geometry, B, alphas):
    _, _, probs_at = _scheme_parts(scheme, geometry)
    return np.array([throughput_capacity(probs_at(a), geometry.n, B).t_c for a in alphas])


def optimal_capacity(scheme: str, geometry, B: int, grid_points: int = 1001) -> OptimizationResult:
    n = geometry.n
    _check(n, B)
    direct, relay_mass, probs_at = _scheme_parts(scheme, geometry)
    gamma = solve_gamma_star(n, B)
    u, _ = _ratios(gamma, n, B)
    t_star = direct + relay_mass / ((1.0 + gamma) * (1.0 + u))
    result = OptimizationResult(
        gamma_star=gamma,
        alpha_star=1.0 / (1.0 + gamma),
        t_c_star=t_star,
        residual=abs(stationarity_residual(gamma, n, B)),
    )
    alphas = np.linspace(0.0, 1.0, grid_points)
    grid = capacity_vs_alpha(scheme, geometry, B, alphas)
    best = int(np.argmax(grid))
    if grid[best] > t_star + 1e-10:
        log.warning(
            "grid maximum %.12g at alpha=%.4f beats stationary point %.12g (n=%d, B=%d)",
            grid[best], alphas[best], t_star, n, B,
        )
        a_lo = alphas[max(best - 1, 0)]
        a_hi = alphas[min(best + 1, grid_points - 1)]
        neg = lambda a: -throughput_capacity(probs_at(a), n, B).t_c
        a, b = _golden(neg, a_lo, a_hi, 1e-12)
        alpha = 0.5 * (a + b)
        gamma = (1.0 - alpha) / alpha
        result = OptimizationResult(
            gamma_star=gamma,
            alpha_star=alpha,
            t_c_star=-neg(alpha),
            residual=abs(stationarity_residual(gamma, n, B)),
        )
    return result


def scaling_limit(n: int, d: float, B: int, alpha: float) -> float:
    """Large-n form ``(alpha / (d beta)) (1 - e^-d - d e^-d) B / (n - 3 + B)``.

    Only the relay contribution survives in this form; the direct S-D term
    ``p1 / d`` (about ``d / (2n)``) is not included.
    """
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie strictly between 0 and 1")
    if d <= 0:
        raise DomainError("density must be positive")
    beta = alpha / (1.0 - alpha)
    busy = 1.0 - math.exp(-d) - d * math.exp(-d)
    return alpha / (d * beta) * busy * B / (n - 3 + B)
