"""Shared builders for small deterministic test graphs and ride fixtures."""

from datetime import datetime

import numpy as np

from bikeflow import Grid, MobilityGraph, Ride

# outer 5-cycle, spokes, inner pentagram; 3-regular, domination number 3
PETERSEN_EDGES = [
    (0, 1), (1, 2), (2, 3), (3, 4), (0, 4),
    (0, 5), (1, 6), (2, 7), (3, 8), (4, 9),
    (5, 7), (7, 9), (9, 6), (6, 8), (8, 5),
]

K4_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]

# triangular prism: two triangles joined by a matching
PRISM_EDGES = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)]


def fan_graph():
    """Node 0 splits 0.5/0.3/0.2 to nodes 1, 2 and itself; 1 and 2 absorb."""
    return MobilityGraph(
        [(0, 0, 0.2), (0, 1, 0.5), (0, 2, 0.3), (1, 1, 1.0), (2, 2, 1.0)]
    )


def chain_graph():
    """Deterministic path 0 -> 1 -> 2 with a self-loop sink at 2."""
    return MobilityGraph([(0, 1, 1.0), (1, 2, 1.0), (2, 2, 1.0)])


def star_graph(leaves: int = 5):
    """Hub 0 spreads uniformly over the leaves; leaves return to the hub."""
    p = 1.0 / leaves
    edges = [(0, leaf, p) for leaf in range(1, leaves + 1)]
    edges += [(leaf, 0, 1.0) for leaf in range(1, leaves + 1)]
    return MobilityGraph(edges)


def ride(start, end, when="2019-10-07 07:30:00", user="u1", bike="b1"):
    t = datetime.fromisoformat(when)
    return Ride(user, bike, start[0], start[1], end[0], end[1], t, t)


def small_grid(rows=4, cols=4, cell=100.0):
    return Grid(origin_lat=45.40, origin_lon=11.87, cell_size_m=cell, n_rows=rows, n_cols=cols)


def cell_center(grid: Grid, row: int, col: int):
    x = (col + 0.5) * grid.cell_size_m
    y = (row + 0.5) * grid.cell_size_m
    return grid.latlon_of_local(x, y)


def rides_csv_text(rides_rows):
    lines = ["user_id,bike_id,start_lat,start_lon,end_lat,end_lon,start_time,end_time"]
    lines += [",".join(str(x) for x in row) for row in rides_rows]
    return "\n".join(lines) + "\n"


def total_load(loads: np.ndarray) -> float:
    return float(np.sum(loads))
