"""Seed-set selection: exact brute force, greedy, lazy greedy, baselines.

Both spread objectives are monotone in the seed set. The square-root
objective is also submodular, so greedy carries the usual (1 - 1/e)
guarantee relative to the optimum and lazy greedy provably matches plain
greedy. The threshold objective is NOT submodular (two seeds can each
contribute less than gamma to a node yet jointly push it over), so under it
greedy has no worst-case guarantee and lazy greedy is a heuristic; both
remain exact maximizers of their own selection rule and brute force is
always exact.

Marginal gains are priced through linearity of propagation: the loads of
S + {u} are the loads of S plus bikes_per_node times u's tau-step operator
column, never by re-propagating the extended set.
"""

import heapq
import itertools
import math
import time
from dataclasses import dataclass

import numpy as np

from .config import BRUTE_FORCE_CAP
from .diffusion import SeedSet, TransitionOperator, build_operator
from .mobility_graph import MobilityGraph
from .objectives import SpreadObjective

# Candidate load matrices are scanned in blocks of about this many float64
# entries, bounding peak memory independent of candidate count.
_BATCH_ENTRIES = 4_000_000


class BruteForceCapError(RuntimeError):
    """Exhaustive search refused: the subset count exceeds the evaluation cap."""

    def __init__(self, required_evaluations: int, cap: int):
        self.required_evaluations = required_evaluations
        self.cap = cap
        super().__init__(
            f"brute force would need {required_evaluations} spread evaluations, "
            f"above the cap of {cap}"
        )


@dataclass(frozen=True)
class ProblemInstance:
    """One optimization task: graph, objective, and the (k, L, tau) parameters.

    base_loads is reserved for pre-existing bikes on non-seed nodes; the
    solvers reject it until its normalization semantics are settled.
    """

    graph: MobilityGraph
    objective: SpreadObjective
    k: int
    bikes_per_node: int
    tau: int
    base_loads: object = None

    def __post_init__(self):
        if not 0 < self.k <= self.graph.n:
            raise ValueError(f"k must satisfy 0 < k <= n = {self.graph.n}, got {self.k}")
        if self.bikes_per_node < 1:
            raise ValueError(f"bikes_per_node must be >= 1, got {self.bikes_per_node}")
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.base_loads is not None:
            raise ValueError("nonzero base loads are reserved and not supported yet")


@dataclass(frozen=True, eq=False)
class Solution:
    """A selected seed set with its spread, final loads and run accounting.

    trace holds (node, cumulative spread) per greedy iteration; empty for
    algorithms without an incremental trajectory.
    """

    seed: SeedSet
    spread: float
    loads: np.ndarray
    algorithm: str
    evaluations: int
    wall_time_s: float
    trace: tuple[tuple[int, float], ...] = ()


class _CountingScorer:
    """Objective wrapper that counts every candidate-spread evaluation."""

    def __init__(self, objective: SpreadObjective):
        self.objective = objective
        self.evaluations = 0

    def one(self, loads: np.ndarray) -> float:
        self.evaluations += 1
        return self.objective.evaluate(loads)

    def extension_spreads(
        self,
        loads_s: np.ndarray,
        cand_ids,
        op: TransitionOperator,
        bikes: float,
    ) -> np.ndarray:
        """Spread of S + {u} for each candidate u, scanned in memory-bounded blocks."""
        n = loads_s.shape[0]
        block = max(1, _BATCH_ENTRIES // max(n, 1))
        out = np.empty(len(cand_ids))
        for lo in range(0, len(cand_ids), block):
            chunk = cand_ids[lo : lo + block]
            mat = loads_s[:, None] + bikes * op.columns(chunk)
            out[lo : lo + len(chunk)] = self.objective.evaluate_columns(mat)
        self.evaluations += len(cand_ids)
        return out


def _prepare(inst: ProblemInstance, operator: TransitionOperator | None):
    if operator is None:
        operator = build_operator(inst.graph, inst.tau)
    elif operator.graph is not inst.graph or operator.tau != inst.tau:
        raise ValueError("operator was built for a different graph or horizon")
    return operator, _CountingScorer(inst.objective)


def greedy_select(inst: ProblemInstance, operator: TransitionOperator | None = None) -> Solution:
    """Plain greedy: k rounds, each adding the candidate with maximal gain.

    Ties go to the smallest node id (candidates are scanned in ascending id
    order and only a strictly larger spread displaces the incumbent), so the
    result is deterministic regardless of evaluation parallelism.
    """
    t0 = time.perf_counter()
    op, scorer = _prepare(inst, operator)
    graph, bikes = inst.graph, float(inst.bikes_per_node)

    loads = np.zeros(graph.n)
    chosen: list[int] = []
    remaining = list(graph.node_ids)
    trace: list[tuple[int, float]] = []
    for _ in range(inst.k):
        spreads = scorer.extension_spreads(loads, remaining, op, bikes)
        j = int(np.argmax(spreads))
        u = remaining.pop(j)
        chosen.append(u)
        loads = loads + bikes * op.column(u)
        trace.append((u, float(spreads[j])))

    seed = SeedSet(tuple(chosen), inst.bikes_per_node)
    return Solution(
        seed=seed,
        spread=trace[-1][1],
        loads=loads,
        algorithm="greedy",
        evaluations=scorer.evaluations,
        wall_time_s=time.perf_counter() - t0,
        trace=tuple(trace),
    )


def lazy_greedy_select(inst: ProblemInstance, operator: TransitionOperator | None = None) -> Solution:
    """Lazy greedy: keep stale marginal gains in a max-heap and re-evaluate
    only the top entry until it is fresh.

    For a submodular objective (square root), stored gains are upper bounds
    on current gains, so a fresh top entry is a valid greedy pick and the
    spread matches plain greedy (chosen nodes can differ when gains tie).
    The threshold objective is not submodular, so there the stale bounds can
    undershoot and the result may fall below plain greedy's spread.
    """
    t0 = time.perf_counter()
    op, scorer = _prepare(inst, operator)
    graph, bikes = inst.graph, float(inst.bikes_per_node)

    loads = np.zeros(graph.n)
    current = scorer.one(loads)
    gains = scorer.extension_spreads(loads, list(graph.node_ids), op, bikes) - current
    # Heap entries (-gain, node, round_evaluated); node breaks gain ties
    # toward the smallest id, mirroring plain greedy.
    heap = [(-g, v, 0) for g, v in zip(gains, graph.node_ids)]
    heapq.heapify(heap)

    chosen: list[int] = []
    trace: list[tuple[int, float]] = []
    for i in range(inst.k):
        while True:
            neg_gain, u, evaluated_at = heapq.heappop(heap)
            if evaluated_at == i:
                break
            fresh = scorer.one(loads + bikes * op.column(u))
            heapq.heappush(heap, (-(fresh - current), u, i))
        chosen.append(u)
        loads = loads + bikes * op.column(u)
        current = current - neg_gain
        trace.append((u, current))

    seed = SeedSet(tuple(chosen), inst.bikes_per_node)
    return Solution(
        seed=seed,
        spread=current,
        loads=loads,
        algorithm="lazy",
        evaluations=scorer.evaluations,
        wall_time_s=time.perf_counter() - t0,
        trace=tuple(trace),
    )


def brute_force_select(
    inst: ProblemInstance,
    operator: TransitionOperator | None = None,
    cap: int = BRUTE_FORCE_CAP,
) -> Solution:
    """Evaluate every k-subset; return the lexicographically smallest maximizer.

    Refuses upfront (with the required evaluation count) when C(n, k) exceeds
    the cap. Enumeration is lexicographic in ascending node id and only a
    strictly larger spread displaces the incumbent.
    """
    n = inst.graph.n
    required = math.comb(n, inst.k)
    if required > cap:
        raise BruteForceCapError(required, cap)

    t0 = time.perf_counter()
    op, scorer = _prepare(inst, operator)
    bikes = float(inst.bikes_per_node)
    node_ids = inst.graph.node_ids

    best_spread = -math.inf
    best_prefix: tuple[int, ...] | None = None
    best_last = -1
    for prefix in itertools.combinations(range(n), inst.k - 1):
        first_last = prefix[-1] + 1 if prefix else 0
        lasts = [node_ids[i] for i in range(first_last, n)]
        if not lasts:
            continue
        prefix_loads = np.zeros(n)
        for i in prefix:
            prefix_loads += bikes * op.column(node_ids[i])
        spreads = scorer.extension_spreads(prefix_loads, lasts, op, bikes)
        j = int(np.argmax(spreads))
        if spreads[j] > best_spread:
            best_spread = float(spreads[j])
            best_prefix = prefix
            best_last = first_last + j

    assert best_prefix is not None
    chosen = tuple(node_ids[i] for i in (*best_prefix, best_last))
    seed = SeedSet(chosen, inst.bikes_per_node)
    loads = bikes * op.columns(seed.nodes).sum(axis=1)
    return Solution(
        seed=seed,
        spread=best_spread,
        loads=loads,
        algorithm="brute",
        evaluations=scorer.evaluations,
        wall_time_s=time.perf_counter() - t0,
    )


def baseline_select(
    inst: ProblemInstance,
    strategy: str,
    rng_seed: int = 0,
    operator: TransitionOperator | None = None,
) -> Solution:
    """Non-search baselines: 'random' (seeded, without replacement) or
    'top_out_degree' (k nodes with the most outgoing edges, ties by id)."""
    t0 = time.perf_counter()
    op, scorer = _prepare(inst, operator)
    graph = inst.graph

    if strategy == "random":
        rng = np.random.default_rng(rng_seed)
        chosen = rng.choice(graph.node_ids, size=inst.k, replace=False)
        chosen = tuple(int(v) for v in chosen)
    elif strategy == "top_out_degree":
        ranked = sorted(graph.node_ids, key=lambda v: (-graph.out_degree(v), v))
        chosen = tuple(ranked[: inst.k])
    else:
        raise ValueError(f"unknown baseline strategy {strategy!r}")

    seed = SeedSet(chosen, inst.bikes_per_node)
    loads = op.seed_loads(seed)
    spread = scorer.one(loads)
    return Solution(
        seed=seed,
        spread=spread,
        loads=loads,
        algorithm=strategy,
        evaluations=scorer.evaluations,
        wall_time_s=time.perf_counter() - t0,
    )
