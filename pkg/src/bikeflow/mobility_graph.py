"""Build, prune, serialize and validate the directed probabilistic mobility graph.

Nodes are grid cells of the service area; the weight of edge (u, v) is the
empirical probability that a ride starting in cell u ends in cell v, so the
outgoing weights of every node sum to one (self-loops included).
"""

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field
from datetime import datetime

from .config import TOL

# Equirectangular scale: metres per degree of latitude. Good enough at city
# scale; longitude is additionally scaled by cos(origin latitude).
M_PER_DEG_LAT = 111_320.0

RIDES_CSV_COLUMNS = [
    "user_id", "bike_id",
    "start_lat", "start_lon", "end_lat", "end_lon",
    "start_time", "end_time",
]


class OutOfAreaError(ValueError):
    """A point falls outside the grid bounding box."""


class GraphFormatError(ValueError):
    """A graph or rides file violates the expected line format."""


@dataclass(frozen=True)
class Ride:
    """One rental: who, which bike, where it started and ended, and when."""

    user_id: str
    bike_id: str
    start_lat: float
    start_lon: float
    end_lat: float
    end_lon: float
    start_time: datetime
    end_time: datetime

    def __post_init__(self):
        if self.end_time < self.start_time:
            raise ValueError(f"ride ends before it starts: {self.start_time} -> {self.end_time}")
        for name, lat in (("start_lat", self.start_lat), ("end_lat", self.end_lat)):
            if not -90.0 <= lat <= 90.0:
                raise ValueError(f"{name} out of range: {lat}")
        for name, lon in (("start_lon", self.start_lon), ("end_lon", self.end_lon)):
            if not -180.0 <= lon <= 180.0:
                raise ValueError(f"{name} out of range: {lon}")


@dataclass(frozen=True)
class Grid:
    """Axis-aligned grid of s x s metre cells anchored at its southwest corner.

    Cell ids are dense integers row * n_cols + col, rows growing north and
    columns growing east. Cells are half-open: a point on a shared boundary
    belongs to the cell on the north/east side.
    """

    origin_lat: float
    origin_lon: float
    cell_size_m: float
    n_rows: int
    n_cols: int

    def __post_init__(self):
        if self.cell_size_m <= 0:
            raise ValueError(f"cell_size_m must be positive, got {self.cell_size_m}")
        if self.n_rows < 1 or self.n_cols < 1:
            raise ValueError(f"grid must have at least one row and column, got {self.n_rows}x{self.n_cols}")

    @property
    def n_cells(self) -> int:
        return self.n_rows * self.n_cols

    def cell_id(self, row: int, col: int) -> int:
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            raise OutOfAreaError(f"cell ({row}, {col}) outside {self.n_rows}x{self.n_cols} grid")
        return row * self.n_cols + col

    def cell_rowcol(self, cell: int) -> tuple[int, int]:
        if not 0 <= cell < self.n_cells:
            raise ValueError(f"cell id {cell} outside [0, {self.n_cells})")
        return divmod(cell, self.n_cols)

    def local_xy(self, lat: float, lon: float) -> tuple[float, float]:
        """Project (lat, lon) to metres east/north of the grid origin."""
        x = (lon - self.origin_lon) * M_PER_DEG_LAT * math.cos(math.radians(self.origin_lat))
        y = (lat - self.origin_lat) * M_PER_DEG_LAT
        return x, y

    def latlon_of_local(self, x_m: float, y_m: float) -> tuple[float, float]:
        """Inverse of local_xy; used when exporting cell polygons."""
        lat = self.origin_lat + y_m / M_PER_DEG_LAT
        lon = self.origin_lon + x_m / (M_PER_DEG_LAT * math.cos(math.radians(self.origin_lat)))
        return lat, lon

    def cell_of_local(self, x_m: float, y_m: float) -> int:
        """Cell containing a point given in local metres. Half-open cells."""
        row = math.floor(y_m / self.cell_size_m)
        col = math.floor(x_m / self.cell_size_m)
        if not (0 <= row < self.n_rows and 0 <= col < self.n_cols):
            raise OutOfAreaError(
                f"point at local ({x_m:.1f} m, {y_m:.1f} m) outside {self.n_rows}x{self.n_cols} grid"
            )
        return row * self.n_cols + col

    @classmethod
    def covering(cls, points: list[tuple[float, float]], cell_size_m: float) -> "Grid":
        """Smallest grid anchored at the southwest-most point that covers all points."""
        if not points:
            raise ValueError("cannot derive a grid from zero points")
        origin_lat = min(p[0] for p in points)
        origin_lon = min(p[1] for p in points)
        probe = cls(origin_lat, origin_lon, cell_size_m, n_rows=1, n_cols=1)
        xs, ys = zip(*(probe.local_xy(lat, lon) for lat, lon in points))
        n_rows = math.floor(max(ys) / cell_size_m) + 1
        n_cols = math.floor(max(xs) / cell_size_m) + 1
        return cls(origin_lat, origin_lon, cell_size_m, n_rows=n_rows, n_cols=n_cols)


def snap_point(lat: float, lon: float, grid: Grid) -> int:
    """Snap a WGS84 point to the id of the grid cell containing it."""
    x, y = grid.local_xy(lat, lon)
    return grid.cell_of_local(x, y)


@dataclass(frozen=True)
class TimeWindow:
    """Half-open time-of-day interval [start, end) in minutes after midnight.

    A window with end <= start wraps past midnight.
    """

    start_minute: int
    end_minute: int

    def __post_init__(self):
        for name, m in (("start_minute", self.start_minute), ("end_minute", self.end_minute)):
            if not 0 <= m < 24 * 60:
                raise ValueError(f"{name} out of range: {m}")
        if self.start_minute == self.end_minute:
            raise ValueError("window start equals end; use an explicit nonempty interval")

    @classmethod
    def parse(cls, text: str) -> "TimeWindow":
        """Accept 'morning', 'evening', or 'HH:MM-HH:MM'."""
        if text == "morning":
            return MORNING
        if text == "evening":
            return EVENING
        try:
            start, end = text.split("-")
            sh, sm = (int(p) for p in start.split(":"))
            eh, em = (int(p) for p in end.split(":"))
        except ValueError:
            raise ValueError(f"cannot parse time window {text!r}; expected HH:MM-HH:MM") from None
        return cls(sh * 60 + sm, eh * 60 + em)

    def contains(self, t: datetime) -> bool:
        minute = t.hour * 60 + t.minute + t.second / 60.0
        if self.start_minute < self.end_minute:
            return self.start_minute <= minute < self.end_minute
        return minute >= self.start_minute or minute < self.end_minute


MORNING = TimeWindow(6 * 60 + 30, 9 * 60)    # 6:30-9:00
EVENING = TimeWindow(16 * 60, 20 * 60)       # 16:00-20:00


class MobilityGraph:
    """Directed graph whose per-node outgoing probabilities sum to one.

    Node ids are arbitrary non-negative integers (grid cell ids when the
    graph comes from rides). The node order used by load vectors and
    transition matrices is ascending node id.
    """

    def __init__(self, edges, node_meta: dict[int, tuple[int, int]] | None = None):
        out: dict[int, dict[int, float]] = {}
        seen: set[tuple[int, int]] = set()
        dests: set[int] = set()
        for src, dst, p in edges:
            src, dst, p = int(src), int(dst), float(p)
            if (src, dst) in seen:
                raise ValueError(f"duplicate edge ({src}, {dst})")
            seen.add((src, dst))
            if not 0.0 < p <= 1.0:
                raise ValueError(f"edge ({src}, {dst}) has probability {p} outside (0, 1]")
            out.setdefault(src, {})[dst] = p
            dests.add(dst)
        if not out:
            raise ValueError("graph has no edges")
        missing = dests - out.keys()
        if missing:
            raise ValueError(
                f"nodes {sorted(missing)} are edge targets but have no outgoing distribution"
            )
        for u, targets in out.items():
            total = math.fsum(targets.values())
            if abs(total - 1.0) > TOL.unity:
                raise ValueError(f"outgoing probabilities of node {u} sum to {total!r}, not 1")

        self._out = {u: dict(sorted(out[u].items())) for u in sorted(out)}
        self._node_ids = tuple(self._out)
        self._index = {u: i for i, u in enumerate(self._node_ids)}
        meta = dict(node_meta) if node_meta else {}
        unknown = meta.keys() - self._index.keys()
        if unknown:
            raise ValueError(f"node_meta refers to unknown nodes {sorted(unknown)}")
        self._meta = {u: (int(r), int(c)) for u, (r, c) in sorted(meta.items())}

    @property
    def n(self) -> int:
        return len(self._node_ids)

    @property
    def m(self) -> int:
        return sum(len(t) for t in self._out.values())

    @property
    def node_ids(self) -> tuple[int, ...]:
        return self._node_ids

    @property
    def node_meta(self) -> dict[int, tuple[int, int]]:
        return dict(self._meta)

    def index(self, node: int) -> int:
        try:
            return self._index[node]
        except KeyError:
            raise KeyError(f"unknown node id {node}") from None

    def has_node(self, node: int) -> bool:
        return node in self._index

    def out_edges(self, node: int) -> dict[int, float]:
        if node not in self._out:
            raise KeyError(f"unknown node id {node}")
        return dict(self._out[node])

    def out_degree(self, node: int) -> int:
        if node not in self._out:
            raise KeyError(f"unknown node id {node}")
        return len(self._out[node])

    def probability(self, src: int, dst: int) -> float:
        return self._out.get(src, {}).get(dst, 0.0)

    def edges(self) -> list[tuple[int, int, float]]:
        """All edges sorted by (src, dst)."""
        return [(u, v, p) for u, targets in self._out.items() for v, p in targets.items()]

    def edge_arrays(self):
        """(src_index, dst_index, probability) arrays for numeric kernels."""
        import numpy as np

        edges = self.edges()
        src = np.fromiter((self._index[e[0]] for e in edges), dtype=np.int64, count=len(edges))
        dst = np.fromiter((self._index[e[1]] for e in edges), dtype=np.int64, count=len(edges))
        p = np.fromiter((e[2] for e in edges), dtype=np.float64, count=len(edges))
        return src, dst, p

    def __eq__(self, other) -> bool:
        if not isinstance(other, MobilityGraph):
            return NotImplemented
        return self._out == other._out and self._meta == other._meta

    def __repr__(self) -> str:
        return f"MobilityGraph(n={self.n}, m={self.m})"


def graphs_close(a: MobilityGraph, b: MobilityGraph, tol: float = 1e-11) -> bool:
    """Same nodes, meta and edges, with probabilities equal within tol."""
    if a.node_ids != b.node_ids or a.node_meta != b.node_meta:
        return False
    ea, eb = a.edges(), b.edges()
    if len(ea) != len(eb):
        return False
    return all(
        ua == ub and va == vb and abs(pa - pb) <= tol
        for (ua, va, pa), (ub, vb, pb) in zip(ea, eb)
    )


@dataclass
class BuildDiagnostics:
    """Counts reported by build_graph; out-of-area rides are skipped, not fatal."""

    total_rides: int = 0
    in_window: int = 0
    out_of_area: int = 0
    used: int = 0

    def as_dict(self) -> dict:
        return {
            "total_rides": self.total_rides,
            "in_window": self.in_window,
            "out_of_area": self.out_of_area,
            "used": self.used,
        }


def build_graph(
    rides: list[Ride], grid: Grid, window: TimeWindow
) -> tuple[MobilityGraph, BuildDiagnostics]:
    """Bin rides to grid cells and form the empirical transition graph.

    Edge (u, v) gets probability n_uv / n_u over rides whose start time falls
    in the window (attribution is by start time only). Cells that only ever
    receive rides keep their bikes: they get a probability-1 self-loop.
    Returns the graph together with binning diagnostics.
    """
    diag = BuildDiagnostics(total_rides=len(rides))
    counts: dict[tuple[int, int], int] = {}
    origins: dict[int, int] = {}
    for ride in rides:
        if not window.contains(ride.start_time):
            continue
        diag.in_window += 1
        try:
            u = snap_point(ride.start_lat, ride.start_lon, grid)
            v = snap_point(ride.end_lat, ride.end_lon, grid)
        except OutOfAreaError:
            diag.out_of_area += 1
            continue
        diag.used += 1
        counts[(u, v)] = counts.get((u, v), 0) + 1
        origins[u] = origins.get(u, 0) + 1

    if diag.used == 0:
        raise ValueError("no rides fall inside the grid and time window")

    edges = [(u, v, c / origins[u]) for (u, v), c in sorted(counts.items())]
    sink_only = {v for _, v in counts} - origins.keys()
    edges.extend((v, v, 1.0) for v in sorted(sink_only))

    cells = origins.keys() | {v for _, v in counts}
    meta = {cell: grid.cell_rowcol(cell) for cell in cells}
    return MobilityGraph(edges, node_meta=meta), diag


def prune_graph(g: MobilityGraph, eta: float) -> MobilityGraph:
    """Drop edges with probability below eta, folding their mass into self-loops.

    Self-loops are exempt from the threshold. Nodes left with no edges or only
    a self-loop are then removed in a single pass, and edges into removed
    nodes are redirected into the source's self-loop so outgoing sums stay
    one. The pass does not cascade: a node that becomes self-loop-only
    through redirection survives, so absorbing regions are not silently
    drained out of the graph.
    """
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"pruning threshold must lie in [0, 1), got {eta}")

    out = {u: g.out_edges(u) for u in g.node_ids}
    for u, targets in out.items():
        low = [v for v, p in targets.items() if v != u and p < eta]
        if low:
            mass = math.fsum(targets.pop(v) for v in sorted(low))
            targets[u] = targets.get(u, 0.0) + mass

    doomed = {u for u in out if not any(v != u for v in out[u])}
    alive = set(out) - doomed
    if not alive:
        raise ValueError(f"pruning at eta={eta} removed every node")
    for u in sorted(alive):
        targets = out[u]
        hit = [v for v in targets if v in doomed]
        if hit:
            mass = math.fsum(targets.pop(v) for v in sorted(hit))
            targets[u] = targets.get(u, 0.0) + mass

    edges = [(u, v, p) for u in sorted(alive) for v, p in sorted(out[u].items())]
    meta = {u: rc for u, rc in g.node_meta.items() if u in alive}
    return MobilityGraph(edges, node_meta=meta or None)


# Sentinel written in place of row/col for nodes without grid coordinates.
_NO_META = -1


def save_graph(g: MobilityGraph, path: str) -> None:
    """Write the line-oriented graph file (header, node lines, edge lines)."""
    meta = g.node_meta
    lines = [f"{g.n} {g.m}"]
    for u in g.node_ids:
        row, col = meta.get(u, (_NO_META, _NO_META))
        lines.append(f"N {u} {row} {col}")
    for u, v, p in g.edges():
        lines.append(f"E {u} {v} {p:.12g}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def load_graph(path: str) -> MobilityGraph:
    """Parse and validate a graph file written by save_graph."""
    with open(path, encoding="utf-8") as fh:
        raw = fh.read().splitlines()
    if not raw:
        raise GraphFormatError(f"{path}: empty graph file")

    def fail(lineno: int, msg: str):
        raise GraphFormatError(f"{path}:{lineno}: {msg}")

    header = raw[0].split()
    if len(header) != 2:
        fail(1, f"expected 'n m' header, got {raw[0]!r}")
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        fail(1, f"non-integer header {raw[0]!r}")

    meta: dict[int, tuple[int, int]] = {}
    declared: set[int] = set()
    edges: list[tuple[int, int, float]] = []
    edge_keys: set[tuple[int, int]] = set()
    seen_edge_line = False
    for lineno, line in enumerate(raw[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if parts[0] == "N":
            if seen_edge_line:
                fail(lineno, "node line after edge lines")
            if len(parts) != 4:
                fail(lineno, f"expected 'N <node> <row> <col>', got {line!r}")
            try:
                node, row, col = int(parts[1]), int(parts[2]), int(parts[3])
            except ValueError:
                fail(lineno, f"non-integer field in node line {line!r}")
            if node in declared:
                fail(lineno, f"node {node} declared twice")
            declared.add(node)
            if row != _NO_META and col != _NO_META:
                meta[node] = (row, col)
        elif parts[0] == "E":
            seen_edge_line = True
            if len(parts) != 4:
                fail(lineno, f"expected 'E <src> <dst> <p>', got {line!r}")
            try:
                src, dst, p = int(parts[1]), int(parts[2]), float(parts[3])
            except ValueError:
                fail(lineno, f"malformed edge line {line!r}")
            if src not in declared or dst not in declared:
                fail(lineno, f"edge ({src}, {dst}) references an undeclared node")
            if (src, dst) in edge_keys:
                fail(lineno, f"duplicate edge ({src}, {dst})")
            edge_keys.add((src, dst))
            edges.append((src, dst, p))
        else:
            fail(lineno, f"unknown record type {parts[0]!r}")

    if len(declared) != n:
        raise GraphFormatError(f"{path}: header declares {n} nodes, found {len(declared)}")
    if len(edges) != m:
        raise GraphFormatError(f"{path}: header declares {m} edges, found {len(edges)}")
    silent = declared - {e[0] for e in edges}
    if silent:
        raise GraphFormatError(
            f"{path}: nodes {sorted(silent)} are declared but have no outgoing edges"
        )
    try:
        return MobilityGraph(edges, node_meta=meta or None)
    except ValueError as exc:
        raise GraphFormatError(f"{path}: {exc}") from exc


def load_rides(path: str) -> list[Ride]:
    """Read the rides CSV (header per RIDES_CSV_COLUMNS, ISO-8601 times)."""
    rides = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RIDES_CSV_COLUMNS:
            raise GraphFormatError(
                f"{path}: expected header {','.join(RIDES_CSV_COLUMNS)}, got {reader.fieldnames}"
            )
        for row in reader:
            lineno = reader.line_num
            try:
                rides.append(
                    Ride(
                        user_id=row["user_id"],
                        bike_id=row["bike_id"],
                        start_lat=float(row["start_lat"]),
                        start_lon=float(row["start_lon"]),
                        end_lat=float(row["end_lat"]),
                        end_lon=float(row["end_lon"]),
                        start_time=datetime.fromisoformat(row["start_time"]),
                        end_time=datetime.fromisoformat(row["end_time"]),
                    )
                )
            except (TypeError, ValueError) as exc:
                raise GraphFormatError(f"{path}:{lineno}: bad ride record: {exc}") from exc
    return rides


def _atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".bikeflow-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
