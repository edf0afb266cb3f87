"""Network state and the per-slot operations of the simulator.

These wrappers let tests and scripts drive the compiled kernels one step at
a time; :func:`manetcap.simulation.engine.run_simulation` uses the same
kernels through a block loop.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..errors import DomainError
from ..scheduling import gts_epsilon
from . import kernels as K


class TxKind(enum.IntEnum):
    SD = K.SD
    SR = K.SR
    RD = K.RD

    @property
    def label(self):
        return {0: "S-D", 1: "S-R", 2: "R-D"}[int(self)]


class Transmission(NamedTuple):
    cell: int
    transmitter: int
    receiver: int
    kind: TxKind


@dataclass(frozen=True)
class Packet:
    id: int
    source: int
    destination: int
    creation_slot: int


def partner(u: int) -> int:
    return u ^ 1


def packet_id(source: int, seq: int, n: int) -> int:
    """Unique id of the ``seq``-th packet created at ``source``."""
    return seq * n + source


@dataclass
class NetworkState:
    n: int
    m: int
    B: int
    alpha: float = 0.5
    nu: int = 1
    delta: float = 1.0
    slot: int = 0
    cells: np.ndarray = field(default=None, repr=False)
    last_moved: Packet | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise DomainError(f"n={self.n} must be even and >= 4")
        if self.m < 1 or self.B < 1:
            raise DomainError("need m >= 1 and B >= 1")
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError(f"alpha={self.alpha} outside [0, 1]")
        n, m2 = self.n, self.m * self.m
        if self.cells is None:
            self.cells = np.zeros(n, dtype=np.int64)
        self.local_buf = np.zeros((n, 64), dtype=np.int64)
        self.local_head = np.zeros(n, dtype=np.int64)
        self.local_len = np.zeros(n, dtype=np.int64)
        self.created = np.zeros(n, dtype=np.int64)
        self.relay_src = np.zeros((n, self.B), dtype=np.int64)
        self.relay_seq = np.zeros((n, self.B), dtype=np.int64)
        self.relay_born = np.zeros((n, self.B), dtype=np.int64)
        self.relay_stamp = np.zeros((n, self.B), dtype=np.int64)
        self.relay_len = np.zeros(n, dtype=np.int64)
        self.delivered = np.zeros(n, dtype=np.int64)
        # Scratch space for the schedulers.
        self._counts = np.zeros(m2, dtype=np.int64)
        self._starts = np.zeros(m2, dtype=np.int64)
        self._fill = np.zeros(m2, dtype=np.int64)
        self._order = np.zeros(n, dtype=np.int64)
        self._tx = np.zeros((m2, 4), dtype=np.int64)
        self._scratch = np.zeros(n, dtype=np.int64)
        self._active = np.zeros(1, dtype=np.int64)
        self._moved = np.zeros(2, dtype=np.int64)

    @classmethod
    def create(cls, n, m, B, alpha=0.5, nu=1, delta=1.0, rng=None):
        """New network with empty queues and nodes placed uniformly at random."""
        state = cls(n=n, m=m, B=B, alpha=alpha, nu=nu, delta=delta)
        if rng is not None:
            state.cells[:] = rng.integers(0, m * m, size=n)
        return state

    @property
    def epsilon(self) -> int:
        return gts_epsilon(self.nu, self.delta, self.m)

    @property
    def group_keep(self) -> float:
        """Thinning probability that makes J cells active per slot on average."""
        eps = self.epsilon
        J = (self.m * self.m) // (eps * eps)
        return J * eps * eps / (self.m * self.m)

    def ensure_local_capacity(self, extra: int) -> None:
        """Grow the local ring buffers so each can take ``extra`` more packets."""
        cap = self.local_buf.shape[1]
        need = int(self.local_len.max(initial=0)) + extra + 1
        if need <= cap:
            return
        new_cap = max(2 * cap, need)
        buf = np.zeros((self.n, new_cap), dtype=np.int64)
        for u in range(self.n):
            L = self.local_len[u]
            idx = (self.local_head[u] + np.arange(L)) % cap
            buf[u, :L] = self.local_buf[u, idx]
        self.local_buf = buf
        self.local_head[:] = 0

    def local_packets(self, u: int) -> list:
        cap = self.local_buf.shape[1]
        L = int(self.local_len[u])
        first_seq = int(self.created[u]) - L
        out = []
        for k in range(L):
            born = int(self.local_buf[u, (self.local_head[u] + k) % cap])
            out.append(Packet(packet_id(u, first_seq + k, self.n), u, partner(u), born))
        return out

    def relay_packets(self, u: int) -> list:
        """Relay-queue content of ``u`` in insertion order."""
        out = []
        for j in range(int(self.relay_len[u])):
            src = int(self.relay_src[u, j])
            out.append(
                Packet(packet_id(src, int(self.relay_seq[u, j]), self.n), src, partner(src),
                       int(self.relay_born[u, j]))
            )
        return out

    def push_relay(self, relay: int, source: int, slot: int | None = None) -> Packet:
        """Place a fresh packet of ``source`` straight into ``relay``'s queue.

        Meant for scripted scenarios; the packet skips the local queue.
        """
        if relay in (source, partner(source)):
            raise DomainError("a relay never stores its own or its source's packets")
        if self.relay_len[relay] >= self.B:
            raise DomainError("relay queue is full")
        slot = self.slot if slot is None else slot
        seq = int(self.created[source])
        self.created[source] += 1
        j = int(self.relay_len[relay])
        self.relay_src[relay, j] = source
        self.relay_seq[relay, j] = seq
        self.relay_born[relay, j] = slot
        self.relay_stamp[relay, j] = slot
        self.relay_len[relay] = j + 1
        return Packet(packet_id(source, seq, self.n), source, partner(source), slot)

    def backlog(self) -> tuple[int, int]:
        return int(self.local_len.sum()), int(self.relay_len.sum())

    def snapshot(self) -> tuple:
        return (
            self.cells.copy(), self.local_len.copy(), self.relay_len.copy(),
            self.relay_src.copy(), self.delivered.copy(),
        )


def step_mobility_iid(state: NetworkState, rng) -> NetworkState:
    K.mobility_iid(state.cells, state.m, rng)
    return state


def step_mobility_random_walk(state: NetworkState, rng) -> NetworkState:
    K.mobility_random_walk(state.cells, state.m, rng)
    return state


def generate_arrivals(state: NetworkState, lam: float, rng, slot: int | None = None) -> NetworkState:
    if not (0.0 <= lam <= 1.0):
        raise DomainError(f"lambda={lam} outside [0, 1]")
    state.ensure_local_capacity(1)
    slot = state.slot if slot is None else slot
    K.arrivals(lam, slot, state.local_buf, state.local_head, state.local_len, state.created, rng)
    return state


def _rows(state, ntx):
    return [
        Transmission(int(c), int(s), int(r), TxKind(int(k))) for c, s, r, k in state._tx[:ntx]
    ]


def schedule_lts(state: NetworkState, rng) -> list:
    ntx = K.schedule_lts(state.cells, state.m, state.alpha, rng, state._counts, state._starts,
                         state._fill, state._order, state._tx)
    return _rows(state, ntx)


def schedule_gts(state: NetworkState, slot: int, rng, keep: float | None = None) -> list:
    """Transmissions of the active group; ``keep`` overrides the thinning probability."""
    keep = state.group_keep if keep is None else keep
    ntx = K.schedule_gts(state.cells, state.m, state.nu, state.epsilon, keep, slot,
                         state.alpha, rng, state._counts, state._starts, state._fill,
                         state._order, state._tx, state._scratch, state._active)
    return _rows(state, ntx)


def execute_transmission(state: NetworkState, tx: Transmission) -> NetworkState:
    """Apply one transmission; ``state.last_moved`` is the moved packet or None."""
    kind, s, r = int(tx.kind), tx.transmitter, tx.receiver
    source = partner(r) if kind == K.RD else s
    ok = K.execute(kind, s, r, state.slot, state.B, state.local_buf, state.local_head,
                   state.local_len, state.created, state.relay_src, state.relay_seq,
                   state.relay_born, state.relay_stamp, state.relay_len, state._moved)
    if ok:
        seq, born = int(state._moved[0]), int(state._moved[1])
        state.last_moved = Packet(packet_id(source, seq, state.n), source, partner(source), born)
        if kind != K.SR:
            state.delivered[r] += 1
    else:
        state.last_moved = None
    return state
