"""Numeric tolerances and solver limits shared across the package."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Floating-point slacks used by validators, solvers and tests."""

    unity: float = 1e-9          # per-node outgoing probability sum vs 1
    entry: float = 1e-9          # per-entry agreement between load evaluation paths
    conservation: float = 1e-6   # total-load drift over a full propagation
    threshold_eps: float = 1e-9  # slack on the closed `load >= gamma` comparison
    spread_eq: float = 1e-9      # spread equality between algorithms


TOL = Tolerances()

# Above this node count the optimizer falls back from the dense tau-step
# operator to iterated sparse propagation.
DENSE_OPERATOR_MAX_N = 5000

# Maximum number of seed evaluations brute force will attempt before refusing.
BRUTE_FORCE_CAP = 10_000_000
