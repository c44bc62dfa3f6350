"""Spread objectives scored on a load vector.

Two ways to measure how well bikes cover the graph after propagation:
threshold count (number of nodes holding at least gamma bikes in
expectation) and the sum of square roots of the loads, which rewards
spreading mass thinly over many nodes.
"""

from dataclasses import dataclass

import numpy as np

from .config import TOL


def t_spread(loads: np.ndarray, gamma: float, eps: float = TOL.threshold_eps) -> int:
    """Number of nodes whose load reaches gamma.

    The comparison is load >= gamma - eps so a load that equals gamma up to
    accumulated rounding still counts.
    """
    if gamma <= 0:
        raise ValueError(f"threshold gamma must be positive, got {gamma}")
    loads = _checked(loads)
    return int(np.count_nonzero(loads >= gamma - eps))


def s_spread(loads: np.ndarray) -> float:
    """Sum of square roots of the loads."""
    loads = _checked(loads)
    return float(np.sqrt(loads).sum())


def _checked(loads: np.ndarray) -> np.ndarray:
    loads = np.asarray(loads, dtype=np.float64)
    if loads.ndim != 1:
        raise ValueError(f"load vector must be 1-D, got shape {loads.shape}")
    if loads.size and float(loads.min()) < 0.0:
        raise ValueError(f"negative load {loads.min()!r}; loads must be non-negative")
    return loads


@dataclass(frozen=True)
class SpreadObjective:
    """A scoring rule over load vectors: 'threshold' with a gamma, or 'sqrt'."""

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("threshold", "sqrt"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind == "threshold":
            if self.gamma is None or self.gamma <= 0:
                raise ValueError(f"threshold objective needs gamma > 0, got {self.gamma}")
        elif self.gamma is not None:
            raise ValueError("sqrt objective takes no gamma")

    @classmethod
    def threshold(cls, gamma: float) -> "SpreadObjective":
        return cls("threshold", float(gamma))

    @classmethod
    def sqrt(cls) -> "SpreadObjective":
        return cls("sqrt")

    def evaluate(self, loads: np.ndarray) -> float:
        if self.kind == "threshold":
            return float(t_spread(loads, self.gamma))
        return s_spread(loads)

    def evaluate_columns(self, load_matrix: np.ndarray) -> np.ndarray:
        """Score each column of an (n, c) matrix of candidate load vectors."""
        load_matrix = np.asarray(load_matrix, dtype=np.float64)
        if load_matrix.ndim != 2:
            raise ValueError(f"expected an (n, c) matrix, got shape {load_matrix.shape}")
        if load_matrix.size and float(load_matrix.min()) < 0.0:
            raise ValueError("negative load; loads must be non-negative")
        if self.kind == "threshold":
            hits = load_matrix >= self.gamma - TOL.threshold_eps
            return hits.sum(axis=0).astype(np.float64)
        return np.sqrt(load_matrix).sum(axis=0)

    def describe(self) -> str:
        if self.kind == "threshold":
            return f"threshold(gamma={self.gamma:g})"
        return "sqrt"


def evaluate(objective: SpreadObjective, loads: np.ndarray) -> float:
    """Score a load vector under the given objective (threshold count as real)."""
    if not isinstance(objective, SpreadObjective):
        raise TypeError(f"expected a SpreadObjective, got {type(objective).__name__}")
    return objective.evaluate(loads)
