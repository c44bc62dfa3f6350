"""Problem-instance generators: random stochastic graphs and the two
NP-hardness reduction constructions with exhaustively verified certificates.

The reductions map Minimum Dominating Set on d-regular graphs to the
threshold objective and Exact Cover by 3-Sets to the square-root objective.
Both are sized for oracle testing, so each instance can carry the true
yes/no answer and a witness found by exhaustive search.
"""

import itertools
import math
import warnings
from dataclasses import dataclass

import networkx as nx
import numpy as np

from .mobility_graph import MobilityGraph
from .objectives import SpreadObjective
from .optimizer import ProblemInstance

# Exhaustive certificate searches refuse beyond this many candidate subsets.
_ORACLE_CAP = 5_000_000


@dataclass(frozen=True)
class MdsInstance:
    """Undirected, connected, d-regular graph (d >= 3) with a set-size budget k.

    Vertices are 0..n_vertices-1; edges are canonical (u, v) pairs with u < v.
    """

    n_vertices: int
    edges: tuple[tuple[int, int], ...]
    k: int

    def __post_init__(self):
        n = self.n_vertices
        canon = []
        seen = set()
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-edge ({u}, {v}) not allowed in a simple graph")
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) outside vertex range [0, {n})")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            canon.append(key)
        object.__setattr__(self, "edges", tuple(sorted(canon)))

        deg = [0] * n
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        if n == 0:
            raise ValueError("graph has no vertices")
        d = deg[0]
        if any(x != d for x in deg):
            raise ValueError(f"graph is not regular: degrees {sorted(set(deg))}")
        if d < 3:
            raise ValueError(f"degree must be at least 3, got {d}")
        if not self._connected(n):
            raise ValueError("graph is not connected")
        if not 0 < self.k <= n:
            raise ValueError(f"k must satisfy 0 < k <= {n}, got {self.k}")
        if self.k >= n - d + 1:
            warnings.warn(
                f"k={self.k} is outside the window k < n - d + 1 = {n - d + 1} "
                f"assumed by the hardness argument; instance emitted anyway",
                stacklevel=2,
            )

    def _connected(self, n: int) -> bool:
        adj: dict[int, list[int]] = {u: [] for u in range(n)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        seen = {0}
        frontier = [0]
        while frontier:
            u = frontier.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        return len(seen) == n

    @property
    def degree(self) -> int:
        return 2 * len(self.edges) // self.n_vertices

    def neighbors(self, u: int) -> set[int]:
        return {b if a == u else a for a, b in self.edges if u in (a, b)}


@dataclass(frozen=True)
class X3cInstance:
    """Exact-cover input: universe X of 3q elements, collection C of 3-subsets.

    Duplicate subsets are kept; members outside X are rejected.
    """

    universe: tuple[int, ...]
    triples: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        xs = tuple(sorted(int(x) for x in self.universe))
        if len(set(xs)) != len(xs):
            raise ValueError("universe contains duplicate elements")
        if len(xs) == 0 or len(xs) % 3 != 0:
            raise ValueError(f"universe size must be a positive multiple of 3, got {len(xs)}")
        object.__setattr__(self, "universe", xs)
        xset = set(xs)
        canon = []
        for c in self.triples:
            members = tuple(sorted(int(x) for x in c))
            if len(set(members)) != 3:
                raise ValueError(f"subset {c} must have exactly 3 distinct members")
            if not set(members) <= xset:
                raise ValueError(f"subset {c} has members outside the universe")
            canon.append(members)
        if not canon:
            raise ValueError("collection of subsets is empty")
        object.__setattr__(self, "triples", tuple(canon))

    @property
    def q(self) -> int:
        return len(self.universe) // 3

    @property
    def r(self) -> int:
        return len(self.triples)

    def set_node(self, index: int) -> int:
        """Graph node id of the subset at the given collection index."""
        if not 0 <= index < self.r:
            raise IndexError(f"subset index {index} outside [0, {self.r})")
        return index

    def element_node(self, x: int) -> int:
        """Graph node id of a universe element."""
        return self.r + self.universe.index(int(x))


@dataclass(frozen=True)
class ReductionCertificate:
    """Ground truth for a reduced instance: answer, witness, target spread.

    For a yes-instance the optimal spread equals target; for a no-instance it
    falls strictly below. The witness lists a dominating set (vertex ids) or
    an exact cover (collection indices).
    """

    kind: str
    answer: bool
    witness: tuple[int, ...] | None
    target: float


def mds_to_tbs(inst: MdsInstance) -> ProblemInstance:
    """Reduce dominating set to threshold-spread maximization.

    Each undirected edge becomes two directed edges, every vertex gains a
    self-loop, and all probabilities are 1/(d+1). With L = d+1 bikes per seed,
    gamma = 1 and tau = 1, a node holds at least one bike exactly when the
    seed set dominates it, so the spread reaches n iff a dominating set of
    size <= k exists.
    """
    d_prime = inst.degree + 1
    p = 1.0 / d_prime
    edges = [(u, u, p) for u in range(inst.n_vertices)]
    for u, v in inst.edges:
        edges.append((u, v, p))
        edges.append((v, u, p))
    graph = MobilityGraph(edges)
    return ProblemInstance(
        graph=graph,
        objective=SpreadObjective.threshold(1.0),
        k=inst.k,
        bikes_per_node=d_prime,
        tau=1,
    )


def x3c_to_sbs(inst: X3cInstance) -> ProblemInstance:
    """Reduce exact cover by 3-sets to square-root-spread maximization.

    Subset nodes (ids 0..r-1) send probability 1/3 to each of their three
    member elements; element nodes (ids r..r+3q-1, in sorted universe order)
    hold probability-1 self-loops. With k = q seeds of L = 3 bikes and
    tau = 1, the spread reaches 3q iff an exact cover exists.
    """
    edges = []
    for i, members in enumerate(inst.triples):
        for x in members:
            edges.append((inst.set_node(i), inst.element_node(x), 1.0 / 3.0))
    for x in inst.universe:
        edges.append((inst.element_node(x), inst.element_node(x), 1.0))
    graph = MobilityGraph(edges)
    return ProblemInstance(
        graph=graph,
        objective=SpreadObjective.sqrt(),
        k=inst.q,
        bikes_per_node=3,
        tau=1,
    )


def has_dominating_set(inst: MdsInstance) -> tuple[bool, tuple[int, ...] | None]:
    """Exhaustive search for a dominating set of size k (hence any size <= k)."""
    n = inst.n_vertices
    if math.comb(n, inst.k) > _ORACLE_CAP:
        raise ValueError(f"dominating-set search over C({n},{inst.k}) subsets exceeds the cap")
    closed = []
    for u in range(n):
        mask = 1 << u
        for v in inst.neighbors(u):
            mask |= 1 << v
        closed.append(mask)
    full = (1 << n) - 1
    for cand in itertools.combinations(range(n), inst.k):
        covered = 0
        for u in cand:
            covered |= closed[u]
        if covered == full:
            return True, cand
    return False, None


def has_exact_cover(inst: X3cInstance) -> tuple[bool, tuple[int, ...] | None]:
    """Exhaustive search for q pairwise-disjoint subsets covering the universe."""
    if math.comb(inst.r, inst.q) > _ORACLE_CAP:
        raise ValueError(f"exact-cover search over C({inst.r},{inst.q}) subsets exceeds the cap")
    rank = {x: i for i, x in enumerate(inst.universe)}
    masks = []
    for members in inst.triples:
        mask = 0
        for x in members:
            mask |= 1 << rank[x]
        masks.append(mask)
    full = (1 << len(inst.universe)) - 1
    for cand in itertools.combinations(range(inst.r), inst.q):
        covered = 0
        ok = True
        for i in cand:
            if covered & masks[i]:
                ok = False
                break
            covered |= masks[i]
        if ok and covered == full:
            return True, cand
    return False, None


def mds_certificate(inst: MdsInstance) -> ReductionCertificate:
    answer, witness = has_dominating_set(inst)
    return ReductionCertificate("mds", answer, witness, float(inst.n_vertices))


def x3c_certificate(inst: X3cInstance) -> ReductionCertificate:
    answer, witness = has_exact_cover(inst)
    return ReductionCertificate("x3c", answer, witness, float(3 * inst.q))


def random_instance(
    n: int, avg_out_degree: float, self_loop_min: float = 0.05, rng_seed: int = 0
) -> MobilityGraph:
    """Random stochastic graph: every node gets a self-loop of at least
    self_loop_min plus random extra targets, probabilities normalized to 1.

    Out-degrees concentrate around avg_out_degree (self-loop included).
    Deterministic per rng_seed.
    """
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    if not 1.0 <= avg_out_degree <= n:
        raise ValueError(f"avg_out_degree must lie in [1, {n}], got {avg_out_degree}")
    if not 0.0 <= self_loop_min < 1.0:
        raise ValueError(f"self_loop_min must lie in [0, 1), got {self_loop_min}")

    rng = np.random.default_rng(rng_seed)
    edges = []
    extra_p = (avg_out_degree - 1.0) / (n - 1) if n > 1 else 0.0
    for u in range(n):
        n_extra = int(rng.binomial(n - 1, extra_p)) if n > 1 else 0
        others = rng.choice([v for v in range(n) if v != u], size=n_extra, replace=False)
        targets = [u, *sorted(int(v) for v in others)]
        raw = 1.0 + rng.random(len(targets))
        probs = raw / raw.sum()
        if probs[0] < self_loop_min:
            scale = (1.0 - self_loop_min) / (1.0 - probs[0])
            probs = probs * scale
            probs[0] = self_loop_min
        edges.extend((u, v, float(p)) for v, p in zip(targets, probs))
    return MobilityGraph(edges)


def random_mds_instance(n: int, d: int, k: int, rng_seed: int = 0) -> MdsInstance:
    """Random connected d-regular graph with budget k; deterministic per seed."""
    if d < 3 or d >= n or (n * d) % 2 != 0:
        raise ValueError(f"no {d}-regular simple graph on {n} vertices (need 3 <= d < n, n*d even)")
    for attempt in range(100):
        g = nx.random_regular_graph(d, n, seed=rng_seed * 1000 + attempt)
        if nx.is_connected(g):
            return MdsInstance(n, tuple(g.edges()), k)
    raise RuntimeError(f"no connected {d}-regular graph found after 100 attempts")


def random_x3c_instance(
    q: int, r: int, rng_seed: int = 0, plant_cover: bool = False
) -> X3cInstance:
    """Random exact-cover input with 3q elements and r subsets.

    With plant_cover, the first q subsets (after shuffling the element order)
    partition the universe, so the instance is a guaranteed yes-instance.
    """
    if q < 1 or r < 1:
        raise ValueError(f"need q >= 1 and r >= 1, got q={q}, r={r}")
    if plant_cover and r < q:
        raise ValueError(f"cannot plant a cover of {q} subsets among only {r}")
    rng = np.random.default_rng(rng_seed)
    universe = list(range(1, 3 * q + 1))
    triples: list[tuple[int, ...]] = []
    if plant_cover:
        perm = [universe[i] for i in rng.permutation(3 * q)]
        triples.extend(tuple(sorted(perm[3 * i : 3 * i + 3])) for i in range(q))
    while len(triples) < r:
        pick = rng.choice(universe, size=3, replace=False)
        triples.append(tuple(sorted(int(x) for x in pick)))
    if plant_cover:
        order = rng.permutation(r)
        triples = [triples[i] for i in order]
    return X3cInstance(tuple(universe), tuple(triples))
