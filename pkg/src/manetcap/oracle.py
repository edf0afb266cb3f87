"""Brute-force relay-queue chain over per-destination packet counts.

The state of a relay queue is the vector of packet counts for each of the
``n - 2`` destinations it can serve.  In every slot exactly one of three
things happens: an arrival attempt (probability ``a``) for a uniformly
chosen destination, refused when the queue already holds ``B`` packets; a
delivery opportunity (probability ``p_rd``) towards a uniformly chosen
destination, effective only if a packet for it is queued; or nothing.

The chain is small enough at desk scale to solve exactly, giving ground
truth for the collapsed occupancy chain.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import CapacityError, DomainError, SolverError

MAX_NODES = 8
MAX_BUFFER = 4


@dataclass(frozen=True)
class CompositionState:
    counts: tuple

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def distinct(self) -> int:
        return sum(1 for c in self.counts if c)


@dataclass
class ReferenceChain:
    states: list
    transitions: np.ndarray
    n: int
    B: int
    a: float
    p_rd: float
    index: dict = field(repr=False, default_factory=dict)

    def totals(self) -> np.ndarray:
        return np.array([s.total for s in self.states])

    def distinct_counts(self) -> np.ndarray:
        return np.array([s.distinct for s in self.states])


def enumerate_states(n: int, B: int) -> list:
    """All count vectors over ``n - 2`` destinations with total at most ``B``."""
    if int(n) != n or int(B) != B or n < 4 or B < 1:
        raise DomainError("need integer n >= 4 and B >= 1")
    if n > MAX_NODES or B > MAX_BUFFER:
        raise CapacityError(f"(n={n}, B={B}) exceeds desk-scale bounds n<={MAX_NODES}, B<={MAX_BUFFER}")
    slots = n - 2
    states = []
    for total in range(B + 1):
        level = [
            c for c in itertools.product(range(total + 1), repeat=slots) if sum(c) == total
        ]
        states.extend(CompositionState(c) for c in sorted(level, reverse=True))
    return states


def build_chain(n: int, B: int, a: float, p_rd: float) -> ReferenceChain:
    if a < 0 or p_rd < 0 or a + p_rd > 1.0 + 1e-12:
        raise DomainError(f"event probabilities a={a}, p_rd={p_rd} do not fit in one slot")
    states = enumerate_states(n, B)
    index = {s.counts: k for k, s in enumerate(states)}
    slots = n - 2
    P = np.zeros((len(states), len(states)))
    for k, s in enumerate(states):
        for dest in range(slots):
            counts = list(s.counts)
            if s.total < B:
                counts[dest] += 1
                P[k, index[tuple(counts)]] += a / slots
                counts[dest] -= 1
            else:
                P[k, k] += a / slots
            if counts[dest] > 0:
                counts[dest] -= 1
                P[k, index[tuple(counts)]] += p_rd / slots
            else:
                P[k, k] += p_rd / slots
        P[k, k] += 1.0 - a - p_rd
    return ReferenceChain(states=states, transitions=P, n=n, B=B, a=a, p_rd=p_rd, index=index)


def is_irreducible(chain: ReferenceChain) -> bool:
    ncomp, _ = connected_components(chain.transitions > 0, directed=True, connection="strong")
    return ncomp == 1


def stationary_distribution(chain: ReferenceChain) -> np.ndarray:
    """Solve ``pi P = pi``, ``sum(pi) = 1`` by a dense linear solve."""
    if not is_irreducible(chain):
        raise SolverError("chain is reducible; stationary law is not unique")
    P = chain.transitions
    size = P.shape[0]
    A = P.T - np.eye(size)
    A[-1, :] = 1.0
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular balance system: {exc}") from exc
    residual = float(np.max(np.abs(pi @ P - pi)))
    if residual >= 1e-12:
        raise SolverError(f"stationary residual {residual:.3e}", residual=residual)
    return pi


def occupancy_marginal(chain: ReferenceChain, pi: np.ndarray) -> np.ndarray:
    """Aggregate the stationary law by total occupancy 0..B."""
    return np.bincount(chain.totals(), weights=pi, minlength=chain.B + 1)


def conditional_distinct(chain: ReferenceChain, pi: np.ndarray) -> np.ndarray:
    """Table ``T[i, k] = P(k distinct destinations | total i)``."""
    totals, distinct = chain.totals(), chain.distinct_counts()
    table = np.zeros((chain.B + 1, chain.B + 1))
    np.add.at(table, (totals, distinct), pi)
    mass = table.sum(axis=1, keepdims=True)
    return np.divide(table, mass, out=np.zeros_like(table), where=mass > 0)


def total_variation(p, q) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
