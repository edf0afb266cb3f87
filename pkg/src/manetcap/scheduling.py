"""Transmission probabilities under local (LTS) and group-based (GTS) scheduling.

Both schemes live on an ``m x m`` cell grid with ``n`` nodes paired as
``0<->1, 2<->3, ...``.  Powers such as ``(1 - 1/m^2)**n`` are formed as
``exp(n * log1p(-1/m^2))`` so that large networks neither underflow nor
overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .capacity import CapacityResult, TransmissionProbabilities, throughput_capacity
from .errors import DomainError


def _check_pairs(n):
    if int(n) != n or n < 2 or n % 2:
        raise DomainError(f"n={n} must be a positive even integer")


def _check_alpha(alpha):
    if not (0.0 <= alpha <= 1.0):
        raise DomainError(f"alpha={alpha} outside [0, 1]")


@dataclass(frozen=True)
class LtsGeometry:
    """``n`` nodes on an ``m x m`` grid.

    ``m`` may be non-integer for asymptotic evaluations at a prescribed
    density; only the number of cells ``m**2`` enters the formulas.
    """

    n: int
    m: float

    def __post_init__(self):
        _check_pairs(self.n)
        if not self.m >= 1:
            raise DomainError(f"m={self.m} must be >= 1")

    @classmethod
    def from_density(cls, n: int, d: float) -> "LtsGeometry":
        return cls(n=n, m=math.sqrt(n / d))

    @property
    def cells(self) -> float:
        return float(self.m) ** 2

    @property
    def d(self) -> float:
        return self.n / self.cells


@dataclass(frozen=True)
class GtsGeometry:
    n: int
    m: int
    nu: int = 1
    delta: float = 1.0

    def __post_init__(self):
        _check_pairs(self.n)
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m={self.m} must be a positive integer")
        if int(self.nu) != self.nu or self.nu < 1:
            raise DomainError(f"nu={self.nu} must be a positive integer")
        if self.delta < 0:
            raise DomainError(f"delta={self.delta} must be non-negative")
        if 2 * self.nu - 1 > self.m:
            raise DomainError("transmission range wider than the grid")

    @property
    def epsilon(self) -> int:
        return gts_epsilon(self.nu, self.delta, self.m)

    @property
    def J(self) -> int:
        return (self.m * self.m) // (self.epsilon * self.epsilon)

    @property
    def l(self) -> int:
        return (2 * self.nu - 1) ** 2


def lts_contact_probabilities(geom: LtsGeometry) -> tuple[float, float]:
    """Per-cell probabilities of >= 2 nodes (p0) and of >= 1 S-D pair (p1)."""
    n, c = geom.n, geom.cells
    log_empty = math.log1p(-1.0 / c) if c > 1 else -math.inf
    p0 = -math.expm1(n * log_empty) - (n / c) * math.exp((n - 1) * log_empty)
    p1 = -math.expm1((n / 2) * math.log1p(-1.0 / (c * c))) if c > 1 else 1.0
    return max(p0, 0.0), p1


def lts_transmission_probabilities(geom: LtsGeometry, alpha: float) -> TransmissionProbabilities:
    _check_alpha(alpha)
    p0, p1 = lts_contact_probabilities(geom)
    d = geom.d
    return TransmissionProbabilities(
        p_sd=p1 / d, p_sr=alpha * (p0 - p1) / d, p_rd=(1.0 - alpha) * (p0 - p1) / d
    )


def lts_capacity(geom: LtsGeometry, B: int, alpha: float) -> CapacityResult:
    return throughput_capacity(lts_transmission_probabilities(geom, alpha), geom.n, B)


def gts_epsilon(nu: int, delta: float, m: int) -> int:
    """Group spacing that keeps concurrent transmissions non-interfering."""
    if nu < 1 or delta < 0 or m < 1:
        raise DomainError("need nu >= 1, delta >= 0, m >= 1")
    # round() guards the ceiling against representation noise in sqrt(2).
    raw = (1.0 + delta) * math.sqrt(2.0) * nu + nu
    return min(math.ceil(round(raw, 12)), m)


def gts_contact_probabilities(geom: GtsGeometry) -> tuple[float, float]:
    """Active-cell probabilities of a two-node contact (p3) and of an S-D contact (p4).

    Written as ``1 - ((m^2-1)/m^2)^n - n/m^2 ((m^2-l)/m^2)^(n-1)`` and
    ``1 - (1 - (2l-1)/m^4)^(n/2)``, which equal the expressions over the
    common denominator ``m^(2n)``.
    """
    n, c, l = geom.n, float(geom.m) ** 2, geom.l
    log_empty = math.log1p(-1.0 / c) if c > 1 else -math.inf
    log_out = math.log1p(-l / c) if l < c else -math.inf
    p3 = -math.expm1(n * log_empty) - (n / c) * math.exp((n - 1) * log_out)
    frac = (2 * l - 1) / (c * c)
    p4 = -math.expm1((n / 2) * math.log1p(-frac)) if frac < 1 else 1.0
    return max(p3, 0.0), p4


def gts_transmission_probabilities(geom: GtsGeometry, alpha: float) -> TransmissionProbabilities:
    _check_alpha(alpha)
    p3, p4 = gts_contact_probabilities(geom)
    scale = geom.J / geom.n
    return TransmissionProbabilities(
        p_sd=scale * p4, p_sr=alpha * scale * (p3 - p4), p_rd=(1.0 - alpha) * scale * (p3 - p4)
    )


def gts_capacity(geom: GtsGeometry, B: int, alpha: float) -> CapacityResult:
    return throughput_capacity(gts_transmission_probabilities(geom, alpha), geom.n, B)
