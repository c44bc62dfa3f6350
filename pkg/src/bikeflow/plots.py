"""Figure rendering for load heatmaps and benchmark curves.

Loads are binned into five bands from zero to the maximum load (or explicit
edges), colored yellow to dark red; seed cells get a black outline. All
rendering targets files through the Agg backend, never a display.
"""

import numpy as np

# Five bands, light yellow to dark red.
BAND_COLORS = ["#ffffb2", "#fecc5c", "#fd8d3c", "#f03b20", "#bd0026"]
EMPTY_COLOR = "#f2f2f2"


def bin_edges(max_load: float, override: list[float] | None = None) -> list[float]:
    """Four inner edges splitting (0, max_load] into five equal-width bins.

    With an override, exactly four ascending positive edges are required.
    A zero max collapses every edge to zero (everything lands in bin 0).
    """
    if override is not None:
        edges = [float(e) for e in override]
        if len(edges) != 4:
            raise ValueError(f"expected 4 bin edges, got {len(edges)}")
        if any(e <= 0 for e in edges) or sorted(edges) != edges or len(set(edges)) != 4:
            raise ValueError(f"bin edges must be positive and strictly ascending: {edges}")
        return edges
    if max_load < 0:
        raise ValueError(f"max load must be non-negative, got {max_load}")
    width = max_load / 5.0
    return [width * i for i in range(1, 5)]


def assign_bins(loads: np.ndarray, edges: list[float]) -> np.ndarray:
    """Bin index 0..4 per load; bin b covers (edges[b-1], edges[b]]."""
    loads = np.asarray(loads, dtype=np.float64)
    return np.searchsorted(np.asarray(edges), loads, side="left").clip(0, 4)


def render_heatmap(
    grid_shape: tuple[int, int],
    cells: list[tuple[int, int]],
    loads: np.ndarray,
    seed_cells: list[tuple[int, int]],
    out_path: str,
    edges: list[float] | None = None,
    title: str | None = None,
) -> None:
    """Render per-cell loads on the (n_rows, n_cols) grid to a PNG file.

    cells pairs with loads; cells not listed are drawn as empty. Seed cells
    are outlined in black.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.colors import BoundaryNorm, ListedColormap
    from matplotlib.patches import Rectangle

    n_rows, n_cols = grid_shape
    loads = np.asarray(loads, dtype=np.float64)
    if len(cells) != loads.shape[0]:
        raise ValueError(f"{len(cells)} cells but {loads.shape[0]} loads")
    if edges is None:
        edges = bin_edges(float(loads.max()) if loads.size else 0.0)

    field = np.full((n_rows, n_cols), np.nan)
    for (row, col), load in zip(cells, loads):
        field[row, col] = load

    cmap = ListedColormap(BAND_COLORS)
    cmap.set_bad(EMPTY_COLOR)
    cmap.set_under(EMPTY_COLOR)
    top = max(float(loads.max()) if loads.size else 0.0, edges[-1])
    if top <= edges[-1]:
        top = edges[-1] * 1.0001 if edges[-1] > 0 else 1.0
    bounds = [np.nextafter(0.0, 1.0), *edges, top]
    # Degenerate all-zero case: a single flat band.
    if any(b >= a for a, b in zip(bounds[1:], bounds[:-1])):
        bounds = [np.nextafter(0.0, 1.0), 1, 2, 3, 4, 5]
    norm = BoundaryNorm(bounds, cmap.N)

    width = max(4.0, min(14.0, n_cols * 0.35))
    height = max(3.5, min(14.0, n_rows * 0.35))
    fig, ax = plt.subplots(figsize=(width, height))
    mesh = ax.pcolormesh(field, cmap=cmap, norm=norm, edgecolors="#cccccc", linewidth=0.3)
    for row, col in seed_cells:
        ax.add_patch(Rectangle((col, row), 1, 1, fill=False, edgecolor="black", linewidth=2.0))
    ax.set_aspect("equal")
    ax.set_xlabel("column")
    ax.set_ylabel("row")
    if title:
        ax.set_title(title)
    labels = [f"({lo:.3g}, {hi:.3g}]" for lo, hi in zip([0.0, *edges], [*edges, top])]
    cbar = fig.colorbar(mesh, ax=ax, ticks=[(a + b) / 2 for a, b in zip(bounds[:-1], bounds[1:])])
    cbar.ax.set_yticklabels(labels)
    cbar.set_label("load")
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def render_bench(rows: list[dict], out_path: str, title: str | None = None) -> None:
    """Plot wall time against seed size, one line per algorithm, to a PNG.

    rows need keys algorithm, k, wall_time_s; repeated (algorithm, k) pairs
    are averaged.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    series: dict[str, dict[int, list[float]]] = {}
    for row in rows:
        series.setdefault(str(row["algorithm"]), {}).setdefault(int(row["k"]), []).append(
            float(row["wall_time_s"])
        )

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for algorithm in sorted(series):
        ks = sorted(series[algorithm])
        times = [sum(series[algorithm][k]) / len(series[algorithm][k]) for k in ks]
        ax.plot(ks, times, marker="o", label=algorithm)
    ax.set_xlabel("seed size k")
    ax.set_ylabel("wall time (s)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
