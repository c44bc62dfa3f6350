"""Stochastic simulation of atomic bikes, validating the expected-load engine.

Each trial places k * L indivisible bikes on the seed nodes and moves every
bike independently along outgoing edges with the edge probabilities. Sample
means over trials converge to the deterministic load vector, which treats
loads as expectations. Per-trial RNG streams derive from (rng_seed, trial
index), so results do not depend on execution order across trials.
"""

import math
from dataclasses import dataclass

import numpy as np

from .diffusion import SeedSet, propagate
from .mobility_graph import MobilityGraph
from .objectives import s_spread, t_spread


@dataclass(frozen=True, eq=False)
class SimulationResult:
    """Per-node sample statistics over independent trials.

    std_loads is the sample standard deviation (zero when trials == 1).
    mean_sqrt_spread averages the square-root spread of each trial's realized
    counts; by concavity it sits at or below the spread of the mean loads.
    """

    mean_loads: np.ndarray
    std_loads: np.ndarray
    trials: int
    rng_seed: int
    method: str
    mean_sqrt_spread: float


def _row_distributions(graph: MobilityGraph):
    """Per-node target indices and probabilities, in graph index order."""
    rows = []
    for u in graph.node_ids:
        items = sorted(graph.out_edges(u).items())
        targets = np.array([graph.index(v) for v, _ in items], dtype=np.int64)
        probs = np.array([p for _, p in items])
        rows.append((targets, probs / probs.sum()))
    return rows


def _dense_row_matrix(graph: MobilityGraph) -> np.ndarray:
    """Row-stochastic matrix P[u, v] = p(u, v), rows renormalized exactly."""
    n = graph.n
    p = np.zeros((n, n))
    for u, v, prob in graph.edges():
        p[graph.index(u), graph.index(v)] = prob
    return p / p.sum(axis=1, keepdims=True)


def _initial_counts(seed: SeedSet, graph: MobilityGraph) -> np.ndarray:
    counts = np.zeros(graph.n, dtype=np.int64)
    for v in seed.nodes:
        counts[graph.index(v)] = seed.bikes_per_node
    return counts


def simulate(
    seed: SeedSet,
    graph: MobilityGraph,
    tau: int,
    trials: int,
    rng_seed: int,
    method: str = "multinomial",
) -> SimulationResult:
    """Run independent trials of atomic-bike movement and aggregate statistics.

    method 'per_bike' moves each bike with its own draw (the reference
    semantics); 'multinomial' draws one multinomial per occupied node per
    step, which is distributionally identical and much faster.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if tau < 0:
        raise ValueError(f"step count must be non-negative, got {tau}")
    if method not in ("multinomial", "per_bike"):
        raise ValueError(f"unknown simulation method {method!r}")

    n = graph.n
    total = seed.total_bikes
    sum_counts = np.zeros(n, dtype=np.int64)
    sum_sq_counts = np.zeros(n, dtype=np.int64)
    sum_sqrt_spread = 0.0

    if method == "multinomial":
        p_rows = _dense_row_matrix(graph)
    else:
        rows = _row_distributions(graph)
        cum_rows = [(targets, np.cumsum(probs)) for targets, probs in rows]

    start = _initial_counts(seed, graph)
    for trial in range(trials):
        rng = np.random.default_rng([rng_seed, trial])
        if method == "multinomial":
            counts = start.copy()
            for _ in range(tau):
                moved = rng.multinomial(counts, p_rows)
                counts = moved.sum(axis=0, dtype=np.int64)
        else:
            positions = np.repeat(np.arange(n), start)
            for _ in range(tau):
                for i in range(positions.shape[0]):
                    targets, cum = cum_rows[positions[i]]
                    # cum[-1] can fall a few ulps short of 1; clamp the index
                    j = min(np.searchsorted(cum, rng.random(), side="right"), len(targets) - 1)
                    positions[i] = targets[j]
            counts = np.bincount(positions, minlength=n).astype(np.int64)
        if int(counts.sum()) != total:
            raise AssertionError(f"trial {trial} lost bikes: {counts.sum()} != {total}")
        sum_counts += counts
        sum_sq_counts += counts * counts
        sum_sqrt_spread += float(np.sqrt(counts).sum())

    mean = sum_counts / trials
    if trials > 1:
        # Sample variance from exact integer sums; guard tiny negatives from
        # the final float division.
        var = (sum_sq_counts - sum_counts.astype(np.float64) ** 2 / trials) / (trials - 1)
        std = np.sqrt(np.maximum(var, 0.0))
    else:
        std = np.zeros(n)
    return SimulationResult(
        mean_loads=mean,
        std_loads=std,
        trials=trials,
        rng_seed=rng_seed,
        method=method,
        mean_sqrt_spread=sum_sqrt_spread / trials,
    )


@dataclass(frozen=True, eq=False)
class ComparisonReport:
    """Simulation vs deterministic engine: deviations, z-scores, spreads.

    The square-root spread is concave, so mean_sqrt_spread of realized counts
    is expected at or below the deterministic s_spread; both numbers are
    reported rather than forced to agree.
    """

    z_scores: np.ndarray
    max_abs_deviation: float
    t_spread_sim: int
    t_spread_expected: int
    s_spread_sim: float
    s_spread_expected: float
    mean_sqrt_spread: float
    gamma: float
    trials: int
    low_confidence: bool

    def as_dict(self) -> dict:
        return {
            "max_abs_deviation": self.max_abs_deviation,
            "t_spread_sim": self.t_spread_sim,
            "t_spread_expected": self.t_spread_expected,
            "s_spread_sim": self.s_spread_sim,
            "s_spread_expected": self.s_spread_expected,
            "mean_sqrt_spread": self.mean_sqrt_spread,
            "gamma": self.gamma,
            "trials": self.trials,
            "low_confidence": self.low_confidence,
            "max_abs_z": float(np.max(np.abs(self.z_scores))) if self.z_scores.size else 0.0,
        }


def compare(sim: SimulationResult, expected: np.ndarray, gamma: float = 1.0) -> ComparisonReport:
    """Score the simulation against a deterministic load vector.

    z-scores use the standard error of the per-node mean; nodes with zero
    spread and zero deviation score zero. A single-trial simulation is
    flagged low-confidence (its standard errors are undefined).
    """
    expected = np.asarray(expected, dtype=np.float64)
    if expected.shape != sim.mean_loads.shape:
        raise ValueError(
            f"dimension mismatch: simulation has {sim.mean_loads.shape}, expected {expected.shape}"
        )
    dev = sim.mean_loads - expected
    se = sim.std_loads / math.sqrt(sim.trials)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, dev / se, np.where(dev == 0.0, 0.0, np.inf * np.sign(dev)))
    return ComparisonReport(
        z_scores=z,
        max_abs_deviation=float(np.max(np.abs(dev))) if dev.size else 0.0,
        t_spread_sim=t_spread(sim.mean_loads, gamma),
        t_spread_expected=t_spread(expected, gamma),
        s_spread_sim=s_spread(sim.mean_loads),
        s_spread_expected=s_spread(expected),
        mean_sqrt_spread=sim.mean_sqrt_spread,
        gamma=gamma,
        trials=sim.trials,
        low_confidence=sim.trials < 2,
    )


def validate_against_engine(
    seed: SeedSet,
    graph: MobilityGraph,
    tau: int,
    trials: int,
    rng_seed: int,
    gamma: float = 1.0,
    method: str = "multinomial",
) -> tuple[SimulationResult, ComparisonReport]:
    """Simulate and compare against the deterministic propagation in one call."""
    sim = simulate(seed, graph, tau, trials, rng_seed, method=method)
    return sim, compare(sim, propagate(seed, graph, tau), gamma=gamma)
