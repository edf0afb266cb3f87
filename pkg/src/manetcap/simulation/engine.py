"""Simulation runs and replication harness.

Seeds: replication ``r`` of a run with master seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(r,)))``.  The stream depends only on
``(s, r)``, so replications can run in any order or in parallel.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..errors import DomainError
from . import kernels as K
from .network import NetworkState

BLOCK = 4096
SCHEMES = {"lts": K.SCHEME_LTS, "gts": K.SCHEME_GTS}
MOBILITIES = {"iid": K.MOBILITY_IID, "rw": K.MOBILITY_RW}


@dataclass(frozen=True)
class SimConfig:
    n: int = 72
    m: int = 6
    B: int = 5
    alpha: float = 0.5
    lam: float = 0.01
    scheme: str = "lts"
    mobility: str = "iid"
    nu: int = 1
    delta: float = 1.0
    slots: int = 1_000_000
    warmup: int | None = None
    seed: int = 0
    replication: int = 0
    tagged: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 4 or self.n % 2:
            raise DomainError(f"n={self.n} must be an even integer >= 4")
        if int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m={self.m} must be a positive integer")
        if int(self.B) != self.B or self.B < 1:
            raise DomainError(f"B={self.B} must be a positive integer")
        if not (0.0 <= self.alpha <= 1.0):
            raise DomainError(f"alpha={self.alpha} outside [0, 1]")
        if not (0.0 <= self.lam <= 1.0):
            raise DomainError(f"lambda={self.lam} outside [0, 1]")
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {sorted(SCHEMES)}")
        if self.mobility not in MOBILITIES:
            raise DomainError(f"mobility must be one of {sorted(MOBILITIES)}")
        if not (0 <= self.tagged < self.n):
            raise DomainError("tagged node out of range")
        if self.slots <= self.warmup_slots or self.warmup_slots < 0:
            raise DomainError("need slots > warmup >= 0")

    @property
    def warmup_slots(self) -> int:
        return self.slots // 10 if self.warmup is None else int(self.warmup)

    @property
    def measured_slots(self) -> int:
        return self.slots - self.warmup_slots


@dataclass
class SimMetrics:
    config: SimConfig
    measured_slots: int
    throughput: float
    throughput_all: float
    delivered_per_node: np.ndarray = field(repr=False)
    empirical_rbp: float = 0.0
    mean_local_queue: float = 0.0
    tagged_mean_local_queue: float = 0.0
    mean_relay_occupancy: float = 0.0
    tx_counts: dict = field(default_factory=dict)
    opportunities: dict = field(default_factory=dict)
    sd_opportunity_rate: float = 0.0
    tagged_sd_opportunity_rate: float = 0.0
    active_cell_slots: int = 0
    arrivals_total: int = 0
    delivered_total: int = 0
    arrivals_measured: int = 0
    in_flight: tuple = (0, 0)

    SCALARS = (
        "throughput", "throughput_all", "empirical_rbp", "mean_local_queue",
        "tagged_mean_local_queue", "mean_relay_occupancy", "sd_opportunity_rate",
        "tagged_sd_opportunity_rate",
    )

    def record(self) -> dict:
        """Flat row of the run, stable key order."""
        row = {k: v for k, v in asdict(self.config).items()}
        row["measured_slots"] = self.measured_slots
        for key in self.SCALARS:
            row[key] = getattr(self, key)
        for label in ("S-D", "S-R", "R-D"):
            row[f"tx_{label}"] = self.tx_counts[label]
        for label in ("S-D", "S-R", "R-D"):
            row[f"opp_{label}"] = self.opportunities[label]
        row["arrivals_total"] = self.arrivals_total
        row["delivered_total"] = self.delivered_total
        row["local_backlog"], row["relay_backlog"] = self.in_flight
        return row


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replication,))))


def run_simulation(config: SimConfig) -> SimMetrics:
    """Run warm-up then measurement slots and summarise the measured window."""
    rng = replication_rng(config.seed, config.replication)
    state = NetworkState.create(config.n, config.m, config.B, config.alpha, config.nu,
                                config.delta, rng=rng)
    n = config.n
    delivered_meas = np.zeros(n, dtype=np.int64)
    sched = np.zeros((n, 3), dtype=np.int64)
    done = np.zeros(3, dtype=np.int64)
    counters = np.zeros(K.N_COUNTERS, dtype=np.int64)
    eps = state.epsilon if config.scheme == "gts" else 1
    keep = state.group_keep if config.scheme == "gts" else 1.0

    t = 0
    while t < config.slots:
        t1 = min(t + BLOCK, config.slots)
        state.ensure_local_capacity(t1 - t)
        K.run_block(
            t, t1, config.warmup_slots, config.tagged, MOBILITIES[config.mobility],
            SCHEMES[config.scheme], config.m, config.alpha, config.lam, config.B,
            config.nu, eps, keep,
            state.cells, state.local_buf, state.local_head, state.local_len, state.created,
            state.relay_src, state.relay_seq, state.relay_born, state.relay_stamp,
            state.relay_len, state.delivered, delivered_meas, sched, done, counters,
            state._counts, state._starts, state._fill, state._order, state._tx,
            state._scratch, state._active, state._moved, rng,
        )
        t = t1
    state.slot = t

    local_backlog, relay_backlog = state.backlog()
    arrivals, delivered = int(counters[K.C_ARRIVALS]), int(counters[K.C_DELIVERED])
    if arrivals != delivered + local_backlog + relay_backlog:
        raise RuntimeError("packet conservation violated")

    T = config.measured_slots
    labels = ("S-D", "S-R", "R-D")
    return SimMetrics(
        config=config,
        measured_slots=T,
        throughput=delivered_meas[config.tagged] / T,
        throughput_all=float(delivered_meas.sum()) / (n * T),
        delivered_per_node=delivered_meas,
        empirical_rbp=counters[K.C_FULL_OBS] / (n * T),
        mean_local_queue=counters[K.C_LOCAL_SUM] / (n * T),
        tagged_mean_local_queue=counters[K.C_TAGGED_LOCAL_SUM] / T,
        mean_relay_occupancy=counters[K.C_RELAY_SUM] / (n * T),
        tx_counts={lab: int(done[k]) for k, lab in enumerate(labels)},
        opportunities={lab: int(sched[:, k].sum()) for k, lab in enumerate(labels)},
        sd_opportunity_rate=sched[:, K.SD].sum() / (n * T),
        tagged_sd_opportunity_rate=sched[config.tagged, K.SD] / T,
        active_cell_slots=int(counters[K.C_ACTIVE_CELLS]),
        arrivals_total=arrivals,
        delivered_total=delivered,
        arrivals_measured=int(counters[K.C_ARRIVALS_MEAS]),
        in_flight=(local_backlog, relay_backlog),
    )


@dataclass
class ReplicationSummary:
    config: SimConfig
    runs: list
    mean: dict
    half_width: dict

    def interval(self, key):
        return self.mean[key] - self.half_width[key], self.mean[key] + self.half_width[key]


def summarize(config: SimConfig, runs: list) -> ReplicationSummary:
    """Mean and normal-approximation 95% half-width of every scalar metric."""
    runs = sorted(runs, key=lambda r: r.config.replication)
    mean, half = {}, {}
    R = len(runs)
    for key in SimMetrics.SCALARS:
        values = np.array([getattr(r, key) for r in runs], dtype=float)
        mean[key] = float(values.mean())
        half[key] = 1.96 * float(values.std(ddof=1)) / math.sqrt(R) if R > 1 else math.nan
    return ReplicationSummary(config=config, runs=runs, mean=mean, half_width=half)


def run_replications(config: SimConfig, replication_count: int, workers: int = 1,
                     order=None) -> ReplicationSummary:
    """Run replications ``0 .. replication_count - 1`` of ``config``.

    ``order`` optionally fixes the execution order of replication indices;
    it never changes the result.
    """
    if replication_count < 1:
        raise DomainError("replication_count must be >= 1")
    indices = list(range(replication_count)) if order is None else list(order)
    if sorted(indices) != list(range(replication_count)):
        raise DomainError("order must be a permutation of the replication indices")
    configs = [replace(config, replication=r) for r in indices]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(run_simulation, configs))
    else:
        runs = [run_simulation(c) for c in configs]
    return summarize(config, runs)
