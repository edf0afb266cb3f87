"""Slot-level Monte Carlo simulator of the cell-partitioned buffer-limited MANET."""

from .engine import (
    ReplicationSummary,
    SimConfig,
    SimMetrics,
    replication_rng,
    run_replications,
    run_simulation,
    summarize,
)
from .network import (
    NetworkState,
    Packet,
    Transmission,
    TxKind,
    execute_transmission,
    generate_arrivals,
    partner,
    schedule_gts,
    schedule_lts,
    step_mobility_iid,
    step_mobility_random_walk,
)

__all__ = [
    "NetworkState", "Packet", "ReplicationSummary", "SimConfig", "SimMetrics", "Transmission",
    "TxKind", "execute_transmission", "generate_arrivals", "partner", "replication_rng",
    "run_replications", "run_simulation", "schedule_gts", "schedule_lts", "step_mobility_iid",
    "step_mobility_random_walk", "summarize",
]
