"""Throughput capacity of buffer-limited two-hop relay MANETs.

Analytic capacity and blocking (:mod:`.capacity`), scheduling-specific
contact probabilities (:mod:`.scheduling`), the optimal transmission ratio
(:mod:`.optimizer`), an exact small-instance relay chain (:mod:`.oracle`)
and a slot-level simulator (:mod:`.simulation`).
"""

from .capacity import (
    BlockingSolution,
    CapacityResult,
    EmcParams,
    RelayOccupancyDistribution,
    TransmissionProbabilities,
    capacity_alpha_half,
    capacity_infinite_buffer,
    composition_count,
    conditional_occupancy,
    emc_limiting_distribution,
    emc_transition_matrix,
    expected_local_queue_length,
    relay_arrival_rate,
    saturation_blocking,
    service_rate,
    solve_blocking_probability,
    throughput_capacity,
)
from .errors import CapacityError, DomainError, SolverError
from .optimizer import (
    OptimizationResult,
    capacity_vs_alpha,
    optimal_capacity,
    scaling_limit,
    solve_gamma_star,
)
from .scheduling import (
    GtsGeometry,
    LtsGeometry,
    gts_capacity,
    gts_contact_probabilities,
    gts_epsilon,
    gts_transmission_probabilities,
    lts_capacity,
    lts_contact_probabilities,
    lts_transmission_probabilities,
)

__version__ = "0.1.0"
