"""Mixed-traffic microsimulation with centralized cooperative maneuver planning."""

from _coopsim import (
    Network,
    compute_pet,
    gap_accept,
    load_network,
    mlp_grad_check,
    simulate,
    train_heur,
)

__all__ = [
    "Network",
    "compute_pet",
    "gap_accept",
    "load_network",
    "mlp_grad_check",
    "simulate",
    "train_heur",
]
