"""Deterministic load propagation over a mobility graph.

A seed placement puts L bikes on each of k distinct nodes. The expected
number of bikes on each node after t steps (the load vector, a plain float64
array in graph node order) evolves by one matrix-vector product per step with
the column-stochastic one-step matrix W[dst, src] = p(src, dst), so the total
load B = k * L is conserved and the final loads are linear in the seed set.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .config import DENSE_OPERATOR_MAX_N
from .mobility_graph import MobilityGraph, _atomic_write_text


@dataclass(frozen=True)
class SeedSet:
    """k distinct seed nodes with L bikes on each (B = k * L bikes total).

    An empty seed is allowed (it propagates to the zero vector); optimizers
    use it as the base case of marginal-gain arithmetic.
    """

    nodes: tuple[int, ...]
    bikes_per_node: int

    def __post_init__(self):
        nodes = tuple(int(v) for v in self.nodes)
        if len(set(nodes)) != len(nodes):
            raise ValueError(f"seed nodes contain duplicates: {self.nodes}")
        if self.bikes_per_node < 1:
            raise ValueError(f"bikes_per_node must be a positive integer, got {self.bikes_per_node}")
        object.__setattr__(self, "nodes", tuple(sorted(nodes)))

    @property
    def k(self) -> int:
        return len(self.nodes)

    @property
    def total_bikes(self) -> int:
        return self.k * self.bikes_per_node


def one_step_matrix(graph: MobilityGraph) -> sparse.csr_matrix:
    """CSR matrix W with W[dst, src] = p(src, dst); columns sum to one."""
    src, dst, p = graph.edge_arrays()
    n = graph.n
    return sparse.csr_matrix((p, (dst, src)), shape=(n, n))


def init_loads(seed: SeedSet, graph: MobilityGraph) -> np.ndarray:
    """Load vector at t = 0: bikes_per_node on each seed node, zero elsewhere."""
    loads = np.zeros(graph.n)
    for v in seed.nodes:
        loads[graph.index(v)] = float(seed.bikes_per_node)
    return loads


def step(loads: np.ndarray, graph: MobilityGraph) -> np.ndarray:
    """Advance the load vector one step: new[v] = sum_u p(u, v) * old[u]."""
    loads = np.asarray(loads, dtype=np.float64)
    if loads.shape != (graph.n,):
        raise ValueError(f"load vector has shape {loads.shape}, expected ({graph.n},)")
    return one_step_matrix(graph) @ loads


def propagate(seed: SeedSet, graph: MobilityGraph, tau: int) -> np.ndarray:
    """Loads after tau steps from the seed placement, by repeated stepping."""
    if tau < 0:
        raise ValueError(f"step count must be non-negative, got {tau}")
    loads = init_loads(seed, graph)
    if tau == 0:
        return loads
    w = one_step_matrix(graph)
    for _ in range(tau):
        loads = w @ loads
    return loads


class TransitionOperator:
    """The tau-step linear operator A = W^tau for one graph and horizon.

    Small graphs precompute A densely (exponentiation by squaring), which
    makes single columns and full candidate batches cheap. Large graphs keep
    W sparse and apply it tau times per request instead.
    """

    def __init__(self, graph: MobilityGraph, tau: int, dense_max_n: int = DENSE_OPERATOR_MAX_N):
        if tau < 0:
            raise ValueError(f"step count must be non-negative, got {tau}")
        self.graph = graph
        self.tau = tau
        self._w = one_step_matrix(graph)
        if graph.n <= dense_max_n:
            self._dense = np.linalg.matrix_power(self._w.toarray(), tau)
        else:
            self._dense = None

    @property
    def is_dense(self) -> bool:
        return self._dense is not None

    def matrix(self) -> np.ndarray:
        """Dense A, with A[v, u] the tau-step mass from u to v."""
        if self._dense is not None:
            return self._dense
        out = np.eye(self.graph.n)
        for _ in range(self.tau):
            out = self._w @ out
        return out

    def apply(self, loads: np.ndarray) -> np.ndarray:
        """A @ loads."""
        loads = np.asarray(loads, dtype=np.float64)
        if loads.shape != (self.graph.n,):
            raise ValueError(f"load vector has shape {loads.shape}, expected ({self.graph.n},)")
        if self._dense is not None:
            return self._dense @ loads
        out = loads
        for _ in range(self.tau):
            out = self._w @ out
        return out

    def column(self, node: int) -> np.ndarray:
        """A[:, node]: the tau-step load profile of one bike seeded at node."""
        i = self.graph.index(node)
        if self._dense is not None:
            return self._dense[:, i].copy()
        unit = np.zeros(self.graph.n)
        unit[i] = 1.0
        out = unit
        for _ in range(self.tau):
            out = self._w @ out
        return out

    def columns(self, nodes) -> np.ndarray:
        """A[:, nodes] as an (n, len(nodes)) array."""
        idx = [self.graph.index(v) for v in nodes]
        if self._dense is not None:
            return self._dense[:, idx].copy()
        basis = np.zeros((self.graph.n, len(idx)))
        for j, i in enumerate(idx):
            basis[i, j] = 1.0
        out = basis
        for _ in range(self.tau):
            out = self._w @ out
        return out

    def seed_loads(self, seed: SeedSet) -> np.ndarray:
        """Loads after tau steps, via the operator instead of stepping."""
        if seed.k == 0:
            return np.zeros(self.graph.n)
        return float(seed.bikes_per_node) * self.columns(seed.nodes).sum(axis=1)


def build_operator(graph: MobilityGraph, tau: int) -> TransitionOperator:
    """Construct the tau-step operator for the graph."""
    return TransitionOperator(graph, tau)


def linearity_decompose(
    loads_s: np.ndarray,
    column_u: np.ndarray,
    bikes_per_node: int,
    seed_nodes=None,
    node: int | None = None,
) -> np.ndarray:
    """Loads of seed set S + {u} from the loads of S and u's operator column.

    Propagation is linear in the initial placement, so extending a seed set
    adds bikes_per_node times the tau-step column of the new node. This is
    what lets the optimizers price a candidate without re-propagating the
    whole set. Pass seed_nodes and node to assert u is not already a seed.
    """
    loads_s = np.asarray(loads_s, dtype=np.float64)
    column_u = np.asarray(column_u, dtype=np.float64)
    if loads_s.shape != column_u.shape:
        raise ValueError(f"shape mismatch: loads {loads_s.shape} vs column {column_u.shape}")
    if seed_nodes is not None and node is not None and node in tuple(seed_nodes):
        raise ValueError(f"node {node} is already a seed")
    return loads_s + float(bikes_per_node) * column_u


LOADS_CSV_HEADER = ["node_id", "row", "col", "load"]


def write_loads_csv(path: str, graph: MobilityGraph, loads: np.ndarray) -> None:
    """Write per-node loads as CSV node_id,row,col,load in ascending node id.

    row/col come from the graph's grid metadata; nodes without coordinates
    get -1,-1. Loads carry 12 significant digits.
    """
    loads = np.asarray(loads, dtype=np.float64)
    if loads.shape != (graph.n,):
        raise ValueError(f"load vector has shape {loads.shape}, expected ({graph.n},)")
    meta = graph.node_meta
    rows = [",".join(LOADS_CSV_HEADER)]
    for i, v in enumerate(graph.node_ids):
        r, c = meta.get(v, (-1, -1))
        rows.append(f"{v},{r},{c},{loads[i]:.12g}")
    _atomic_write_text(path, "\n".join(rows) + "\n")


def read_loads_csv(path: str, graph: MobilityGraph) -> np.ndarray:
    """Read a loads CSV back into a vector aligned with the graph node order.

    Leading '#' comment lines (artifact provenance) are skipped.
    """
    loads = np.full(graph.n, np.nan)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        while header is not None and header and header[0].lstrip().startswith("#"):
            header = next(reader, None)
        if header != LOADS_CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(LOADS_CSV_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{lineno}: expected node_id,row,col,load, got {row}")
            node, value = int(row[0]), float(row[3])
            if not graph.has_node(node):
                raise ValueError(f"{path}:{lineno}: node {node} is not in the graph")
            loads[graph.index(node)] = value
    if np.isnan(loads).any():
        missing = [v for i, v in enumerate(graph.node_ids) if np.isnan(loads[i])]
        raise ValueError(f"{path}: no load given for nodes {missing[:5]}")
    return loads
