"""Discrete-event simulator for MIM/MSM quantum link chains."""

from ._qlinksim import (
    LinkKind,
    LinkSpec,
    PhysParams,
    ProtocolFault,
    SimTimeoutError,
    StarvedError,
    bsm_success_probability,
    compute_adaptive_rate,
    latch_window,
    measure_latch_recurrence,
    one_way_latency_ps,
    predicted_two_hop_rate,
    recurrence_probability,
    run_bare_link,
    run_chain,
    run_config,
    run_experiment,
    saturation_threshold,
    survival_probability,
    swap_schedule,
)

__all__ = [
    "LinkKind",
    "LinkSpec",
    "PhysParams",
    "ProtocolFault",
    "SimTimeoutError",
    "StarvedError",
    "bsm_success_probability",
    "compute_adaptive_rate",
    "latch_window",
    "measure_latch_recurrence",
    "one_way_latency_ps",
    "predicted_two_hop_rate",
    "recurrence_probability",
    "run_bare_link",
    "run_chain",
    "run_config",
    "run_experiment",
    "saturation_threshold",
    "survival_probability",
    "swap_schedule",
]
