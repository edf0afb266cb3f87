"""Relay-queue occupancy chain, blocking probability and throughput capacity.

A node's relay queue is summarised by its total occupancy ``i`` in
``0..B``.  Given the per-slot opportunity probabilities of a node and the
utilisation ``rho_s`` of its local queue, the occupancy chain is a
birth-death chain whose stationary law is

    pi[i] ~ C_i * (beta * rho_s)**i,     C_i = binom(n - 3 + i, i)

with ``beta = p_sr / p_rd``.  The blocking probability is ``pi[B]`` and the
throughput capacity follows by fixing ``rho_s = 1``.

Every expression involving ``C_i * x**i`` goes through
:func:`occupancy_weights`, which accumulates the term ratios in log space
so that large ``n`` and ``B`` never overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SolverError

# Floating slack allowed on the probability-mass constraint p_sd + p_sr + p_rd <= 1.
_MASS_SLACK = 1e-12


@dataclass(frozen=True)
class TransmissionProbabilities:
    """Per-slot probabilities that a node gets an S-D, S-R or R-D opportunity."""

    p_sd: float
    p_sr: float
    p_rd: float

    def __post_init__(self):
        for name in ("p_sd", "p_sr", "p_rd"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise DomainError(f"{name}={value} is not a probability")
        if self.p_sd + self.p_sr + self.p_rd > 1.0 + _MASS_SLACK:
            raise DomainError("p_sd + p_sr + p_rd exceeds 1")

    @property
    def beta(self) -> float:
        """Ratio p_sr / p_rd (infinite when only S-R is ever chosen)."""
        if self.p_rd == 0.0:
            return 0.0 if self.p_sr == 0.0 else math.inf
        return self.p_sr / self.p_rd

    @property
    def alpha(self) -> float:
        total = self.p_sr + self.p_rd
        return 0.0 if total == 0.0 else self.p_sr / total


@dataclass(frozen=True)
class EmcParams:
    """Parameters (n, B, beta, rho_s) of the collapsed relay-occupancy chain."""

    n: int
    B: int
    beta: float
    rho_s: float

    def __post_init__(self):
        _check_nodes(self.n, minimum=4)
        _check_buffer(self.B)
        if not self.beta >= 0.0:
            raise DomainError(f"beta={self.beta} must be non-negative")
        if not (0.0 <= self.rho_s <= 1.0):
            raise DomainError(f"rho_s={self.rho_s} outside [0, 1]")


@dataclass(frozen=True)
class RelayOccupancyDistribution:
    """Limiting distribution over relay-queue occupancy 0..B."""

    pi: np.ndarray
    params: EmcParams

    @property
    def blocking(self) -> float:
        return float(self.pi[-1])

    def __len__(self):
        return len(self.pi)

    def __getitem__(self, i):
        return self.pi[i]


@dataclass(frozen=True)
class BlockingSolution:
    lam: float
    p_b: float
    rho_s: float
    mu_s: float
    residual: float
    saturated: bool
    iterations: int = 0


@dataclass(frozen=True)
class CapacityResult:
    t_c: float
    p_b_saturated: float
    lambda_tilde: float
    probs: TransmissionProbabilities | None = None


def _check_nodes(n, minimum):
    if int(n) != n or n < minimum:
        raise DomainError(f"n={n} must be an integer >= {minimum}")


def _check_buffer(B):
    if int(B) != B or B < 1:
        raise DomainError(f"B={B} must be an integer >= 1")


def composition_count(n: int, i: int) -> int:
    """Number of ways ``i`` relay packets can be spread over ``n - 2`` destinations.

    Python integers are unbounded, so the exact binomial is returned even
    for very large arguments.
    """
    _check_nodes(n, minimum=4)
    if int(i) != i or i < 0:
        raise DomainError(f"i={i} must be a non-negative integer")
    return math.comb(n - 3 + i, i)


def log_composition_count(n: int, i: int) -> float:
    return math.lgamma(n - 2 + i) - math.lgamma(i + 1) - math.lgamma(n - 2)


def conditional_occupancy(n: int, i: int, k: int) -> float:
    """P(the i queued packets cover exactly k distinct destinations | occupancy i)."""
    _check_nodes(n, minimum=4)
    if int(i) != i or i < 1:
        raise DomainError(f"i={i} must be an integer >= 1")
    if int(k) != k or not (1 <= k <= min(i, n - 2)):
        raise DomainError(f"k={k} outside 1..min(i, n-2)")
    return math.comb(n - 2, k) * math.comb(i - 1, k - 1) / math.comb(n - 3 + i, i)


def occupancy_weights(n: int, B: int, x: float) -> np.ndarray:
    """Normalised weights ``C_i * x**i / sum_j C_j * x**j`` for i = 0..B.

    Uses the term ratio ``(n - 2 + i) / (i + 1) * x`` in log space with the
    maximum subtracted before exponentiation.  ``x = inf`` puts all mass on
    ``B``; ``n = 3`` is accepted here (all ``C_i`` equal one).
    """
    out = np.zeros(B + 1)
    if x == 0.0:
        out[0] = 1.0
        return out
    if math.isinf(x):
        out[-1] = 1.0
        return out
    i = np.arange(B, dtype=float)
    log_ratio = np.log((n - 2 + i) / (i + 1)) + math.log(x)
    log_w = np.concatenate(([0.0], np.cumsum(log_ratio)))
    log_w -= log_w.max()
    w = np.exp(log_w)
    return w / w.sum()


def emc_limiting_distribution(params: EmcParams) -> RelayOccupancyDistribution:
    pi = occupancy_weights(params.n, params.B, params.beta * params.rho_s)
    return RelayOccupancyDistribution(pi=pi, params=params)


def emc_transition_matrix(params: EmcParams, probs: TransmissionProbabilities) -> np.ndarray:
    """One-step transition matrix of the collapsed occupancy chain."""
    B, n = params.B, params.n
    P = np.zeros((B + 1, B + 1))
    up = params.rho_s * probs.p_sr
    for i in range(B + 1):
        if i < B:
            P[i, i + 1] = up
        if i > 0:
            P[i, i - 1] = i / (n - 3 + i) * probs.p_rd
        P[i, i] = 1.0 - P[i].sum()
    return P


def _nonblocking(n: int, B: int, x: float) -> float:
    """1 - pi[B], summed directly so that tiny differences keep their precision."""
    return float(occupancy_weights(n, B, x)[:-1].sum())


def saturation_blocking(n: int, B: int, beta: float) -> float:
    """Blocking probability with the local queue saturated (rho_s = 1)."""
    return float(occupancy_weights(n, B, beta)[-1])


def service_rate(probs: TransmissionProbabilities, p_b: float) -> float:
    if not (0.0 <= p_b <= 1.0):
        raise DomainError(f"p_b={p_b} is not a probability")
    return probs.p_sd + probs.p_sr * (1.0 - p_b)


def relay_arrival_rate(lam: float, probs: TransmissionProbabilities, p_b: float) -> float:
    """Rate at which packets enter one relay queue."""
    mu = service_rate(probs, p_b)
    if lam < 0.0:
        raise DomainError("arrival rate must be non-negative")
    if lam == 0.0:
        return 0.0
    if lam > mu * (1.0 + 1e-12):
        raise DomainError(f"lambda={lam} exceeds service rate {mu}: unstable local queue")
    return lam / mu * probs.p_sr * (1.0 - p_b)


def expected_local_queue_length(lam: float, mu_s: float) -> float:
    """Mean local-queue length of the Bernoulli/Bernoulli queue."""
    if lam >= mu_s:
        raise DomainError(f"lambda={lam} >= mu_s={mu_s}: queue is unbounded")
    return (lam - lam * lam) / (mu_s - lam)


def solve_blocking_probability(
    lam: float,
    probs: TransmissionProbabilities,
    n: int,
    B: int,
    tol: float = 1e-12,
    max_iter: int = 200,
) -> BlockingSolution:
    """Fixed point ``p = pi_B(rho_s(p))`` by bisection on [0, 1].

    ``rho_s(p) = lam / (p_sd + p_sr (1 - p))`` is clamped at 1; when the
    clamp is active at the root the local queue is saturated and the
    saturation blocking value is returned with ``saturated=True``.
    """
    _check_nodes(n, minimum=4)
    _check_buffer(B)
    if lam < 0.0:
        raise DomainError("arrival rate must be non-negative")
    beta = probs.beta

    def rho(p):
        mu = probs.p_sd + probs.p_sr * (1.0 - p)
        if mu <= 0.0:
            return 1.0 if lam > 0 else 0.0
        return min(1.0, lam / mu)

    def F(p):
        r = rho(p)
        if r == 0.0:
            return 0.0
        return float(occupancy_weights(n, B, beta * r)[-1])

    def G(p):
        return F(p) - p

    # At or beyond the saturation rate the clamp is active at the root.
    lam_tilde = probs.p_sd + probs.p_sr * _nonblocking(n, B, beta)
    if lam > 0.0 and lam >= lam_tilde * (1.0 - 1e-12):
        p = saturation_blocking(n, B, beta)
        return BlockingSolution(
            lam=lam, p_b=p, rho_s=1.0, mu_s=service_rate(probs, p), residual=abs(G(p)),
            saturated=True, iterations=0,
        )

    lo, hi = 0.0, 1.0
    g_lo = G(lo)
    it = 0
    if g_lo == 0.0:
        hi = lo
    else:
        while hi - lo > tol:
            if it >= max_iter:
                raise SolverError("bisection did not converge", residual=abs(G(0.5 * (lo + hi))))
            mid = 0.5 * (lo + hi)
            g_mid = G(mid)
            it += 1
            if g_mid == 0.0:
                lo = hi = mid
                break
            if (g_mid > 0.0) == (g_lo > 0.0):
                lo, g_lo = mid, g_mid
            else:
                hi = mid
    # lo has G >= 0 and hi has G <= 0; pick the endpoint with smaller residual.
    p = min((lo, hi), key=lambda q: abs(G(q)))
    residual = abs(G(p))
    if residual >= 1e-10:
        raise SolverError(f"fixed-point residual {residual:.3e} too large", residual=residual)
    mu = probs.p_sd + probs.p_sr * (1.0 - p)
    return BlockingSolution(
        lam=lam, p_b=p, rho_s=rho(p), mu_s=mu, residual=residual, saturated=False, iterations=it
    )


def throughput_capacity(
    probs: TransmissionProbabilities, n: int, B: int, beta: float | None = None
) -> CapacityResult:
    """Closed-form throughput capacity ``p_sd + p_sr (1 - pi_B)`` at rho_s = 1."""
    _check_nodes(n, minimum=3)
    _check_buffer(B)
    if beta is None:
        beta = probs.beta
    w = occupancy_weights(n, B, beta)
    t_c = probs.p_sd + probs.p_sr * float(w[:-1].sum())
    return CapacityResult(t_c=t_c, p_b_saturated=float(w[-1]), lambda_tilde=t_c, probs=probs)


def capacity_alpha_half(probs: TransmissionProbabilities, n: int, B: int) -> float:
    """Throughput capacity when S-R and R-D are chosen with equal probability."""
    _check_nodes(n, minimum=3)
    _check_buffer(B)
    if probs.p_rd > 0.0 and not math.isclose(probs.p_sr, probs.p_rd, rel_tol=1e-9, abs_tol=1e-15):
        raise DomainError("capacity_alpha_half needs p_sr == p_rd")
    return probs.p_sd + probs.p_sr * B / (n - 2 + B)


def capacity_infinite_buffer(probs: TransmissionProbabilities, alpha: float) -> float:
    """Limit of the throughput capacity as the relay buffer grows without bound."""
    if not (0.0 <= alpha <= 1.0):
        raise DomainError(f"alpha={alpha} outside [0, 1]")
    if alpha <= 0.5:
        return probs.p_sd + probs.p_sr
    return probs.p_sd + probs.p_rd
