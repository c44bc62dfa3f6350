"""Command-line entry point: build graphs, generate instances, solve, simulate,
export heatmap data, and benchmark.

Every artifact embeds the run configuration and library version: JSON
artifacts in a "config" field, CSV artifacts as leading '#' comment lines.
The graph file format is fixed, so graph-producing commands write the
provenance to a sidecar '<out>.json' instead. All writes are atomic.

Exit codes: 0 success, 1 refused (for example the brute-force cap),
2 usage or validation errors.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import BRUTE_FORCE_CAP
from .diffusion import SeedSet, build_operator, propagate
from .instances import (
    mds_certificate,
    mds_to_tbs,
    random_instance,
    random_mds_instance,
    random_x3c_instance,
    x3c_certificate,
    x3c_to_sbs,
)
from .mobility_graph import (
    Grid,
    GraphFormatError,
    MobilityGraph,
    OutOfAreaError,
    TimeWindow,
    _atomic_write_text,
    build_graph,
    load_graph,
    load_rides,
    prune_graph,
    save_graph,
)
from .montecarlo import compare, simulate
from .objectives import SpreadObjective
from .optimizer import (
    BruteForceCapError,
    ProblemInstance,
    Solution,
    baseline_select,
    brute_force_select,
    greedy_select,
    lazy_greedy_select,
)
from .plots import assign_bins, bin_edges, render_bench, render_heatmap

EXIT_OK = 0
EXIT_REFUSED = 1
EXIT_USAGE = 2


def _config_dict(args: argparse.Namespace) -> dict:
    """The full run configuration embedded in every artifact."""
    options = {
        k: v for k, v in sorted(vars(args).items()) if k not in ("handler",) and v is not None
    }
    env_threads = os.environ.get("BIKEFLOW_THREADS")
    threads = int(env_threads) if env_threads else options.get("threads")
    return {
        "version": __version__,
        "subcommand": options.pop("subcommand", None),
        "threads": threads,
        "options": options,
    }


def _write_json(path: str, payload: dict) -> None:
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: str, header: list[str], rows: list[str], config: dict) -> None:
    lines = [
        f"# bikeflow {__version__}",
        f"# config {json.dumps(config, sort_keys=True)}",
        ",".join(header),
        *rows,
    ]
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _loads_payload(graph: MobilityGraph, loads: np.ndarray) -> dict:
    return {
        "node_ids": list(graph.node_ids),
        "values": [float(x) for x in loads],
    }


def _parse_int_list(text: str, flag: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip() != ""]
    except ValueError:
        raise ValueError(f"{flag} expects a comma-separated list of integers, got {text!r}") from None
    if not values:
        raise ValueError(f"{flag} expects at least one value")
    return values


def _objective_from_args(args: argparse.Namespace) -> SpreadObjective:
    if args.objective == "threshold":
        if args.gamma is None:
            raise ValueError("--gamma is required with --objective threshold")
        return SpreadObjective.threshold(args.gamma)
    if getattr(args, "gamma", None) is not None:
        raise ValueError("--gamma only applies to --objective threshold")
    return SpreadObjective.sqrt()


# --- build-graph -----------------------------------------------------------


def _cmd_build_graph(args: argparse.Namespace) -> int:
    rides = load_rides(args.rides)
    if not rides:
        raise ValueError(f"{args.rides}: no ride records")
    window = TimeWindow.parse(args.window)

    if args.origin is not None or args.rows is not None or args.cols is not None:
        if args.origin is None or args.rows is None or args.cols is None:
            raise ValueError("--origin, --rows and --cols must be given together")
        try:
            lat, lon = (float(p) for p in args.origin.split(","))
        except ValueError:
            raise ValueError(f"--origin expects 'lat,lon', got {args.origin!r}") from None
        grid = Grid(lat, lon, float(args.cell_size), args.rows, args.cols)
    else:
        points = [(r.start_lat, r.start_lon) for r in rides]
        points += [(r.end_lat, r.end_lon) for r in rides]
        grid = Grid.covering(points, float(args.cell_size))

    graph, diag = build_graph(rides, grid, window)
    graph = prune_graph(graph, args.prune)
    save_graph(graph, args.out)
    _write_json(
        args.out + ".json",
        {
            "artifact": "graph",
            "config": _config_dict(args),
            "grid": {
                "origin_lat": grid.origin_lat,
                "origin_lon": grid.origin_lon,
                "cell_size_m": grid.cell_size_m,
                "n_rows": grid.n_rows,
                "n_cols": grid.n_cols,
            },
            "window": args.window,
            "prune_eta": args.prune,
            "diagnostics": diag.as_dict(),
            "n": graph.n,
            "m": graph.m,
        },
    )
    print(f"wrote {args.out}: n={graph.n}, m={graph.m} "
          f"(rides used {diag.used}/{diag.total_rides}, out of area {diag.out_of_area})")
    return EXIT_OK


# --- gen ---------------------------------------------------------------


def _cmd_gen_random(args: argparse.Namespace) -> int:
    graph = random_instance(args.n, args.avg_out_degree, args.self_loop_min, args.rng_seed)
    save_graph(graph, args.out)
    _write_json(
        args.out + ".json",
        {
            "artifact": "instance",
            "kind": "random",
            "config": _config_dict(args),
            "n": graph.n,
            "m": graph.m,
            "certificate": None,
        },
    )
    print(f"wrote {args.out}: n={graph.n}, m={graph.m}")
    return EXIT_OK


def _cmd_gen_mds(args: argparse.Namespace) -> int:
    import warnings as _warnings

    with _warnings.catch_warnings(record=True) as caught:
        _warnings.simplefilter("always")
        inst = random_mds_instance(args.n, args.d, args.k, args.rng_seed)
    notes = [str(w.message) for w in caught]
    problem = mds_to_tbs(inst)
    try:
        cert = mds_certificate(inst)
        certificate = {
            "kind": cert.kind,
            "answer": cert.answer,
            "witness": list(cert.witness) if cert.witness is not None else None,
            "target": cert.target,
        }
    except ValueError as exc:
        certificate = None
        notes.append(f"certificate skipped: {exc}")
    save_graph(problem.graph, args.out)
    _write_json(
        args.out + ".json",
        {
            "artifact": "instance",
            "kind": "mds",
            "config": _config_dict(args),
            "instance": {
                "n_vertices": inst.n_vertices,
                "degree": inst.degree,
                "k": inst.k,
                "edges": [list(e) for e in inst.edges],
            },
            "problem": {
                "objective": "threshold",
                "gamma": 1.0,
                "k": problem.k,
                "L": problem.bikes_per_node,
                "tau": problem.tau,
                "lambda_target": float(inst.n_vertices),
            },
            "certificate": certificate,
            "notes": notes,
            "n": problem.graph.n,
            "m": problem.graph.m,
        },
    )
    print(f"wrote {args.out}: n={problem.graph.n}, m={problem.graph.m}, "
          f"certificate={'yes' if certificate and certificate['answer'] else certificate and 'no' or 'skipped'}")
    return EXIT_OK


def _cmd_gen_x3c(args: argparse.Namespace) -> int:
    inst = random_x3c_instance(args.q, args.r, args.rng_seed, plant_cover=args.plant_cover)
    problem = x3c_to_sbs(inst)
    notes: list[str] = []
    try:
        cert = x3c_certificate(inst)
        certificate = {
            "kind": cert.kind,
            "answer": cert.answer,
            "witness": list(cert.witness) if cert.witness is not None else None,
            "target": cert.target,
        }
    except ValueError as exc:
        certificate = None
        notes.append(f"certificate skipped: {exc}")
    save_graph(problem.graph, args.out)
    _write_json(
        args.out + ".json",
        {
            "artifact": "instance",
            "kind": "x3c",
            "config": _config_dict(args),
            "instance": {
                "universe": list(inst.universe),
                "triples": [list(t) for t in inst.triples],
                "set_nodes": list(range(inst.r)),
                "element_nodes": {str(x): inst.element_node(x) for x in inst.universe},
            },
            "problem": {
                "objective": "sqrt",
                "gamma": None,
                "k": problem.k,
                "L": problem.bikes_per_node,
                "tau": problem.tau,
                "lambda_target": float(3 * inst.q),
            },
            "certificate": certificate,
            "notes": notes,
            "n": problem.graph.n,
            "m": problem.graph.m,
        },
    )
    print(f"wrote {args.out}: n={problem.graph.n}, m={problem.graph.m}, "
          f"certificate={'yes' if certificate and certificate['answer'] else certificate and 'no' or 'skipped'}")
    return EXIT_OK


# --- solve -------------------------------------------------------------


def _solve_dispatch(inst: ProblemInstance, args: argparse.Namespace) -> Solution:
    if args.algorithm == "greedy":
        return greedy_select(inst)
    if args.algorithm == "lazy":
        return lazy_greedy_select(inst)
    if args.algorithm == "brute":
        return brute_force_select(inst, cap=args.brute_cap)
    if args.algorithm == "random":
        return baseline_select(inst, "random", rng_seed=args.rng_seed)
    if args.algorithm == "degree":
        return baseline_select(inst, "top_out_degree")
    raise ValueError(f"unknown algorithm {args.algorithm!r}")


def _cmd_solve(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    objective = _objective_from_args(args)
    inst = ProblemInstance(
        graph=graph, objective=objective, k=args.k, bikes_per_node=args.L, tau=args.tau
    )
    if args.algorithm == "lazy" and objective.kind == "threshold":
        print(
            "warning: the threshold objective is not submodular; "
            "lazy greedy may return a lower spread than plain greedy",
            file=sys.stderr,
        )
    solution = _solve_dispatch(inst, args)
    _write_json(
        args.out,
        {
            "artifact": "solution",
            "config": _config_dict(args),
            "instance": {
                "graph_file": args.graph,
                "n": graph.n,
                "m": graph.m,
                "objective": objective.kind,
                "gamma": objective.gamma,
                "k": inst.k,
                "L": inst.bikes_per_node,
                "tau": inst.tau,
            },
            "algorithm": solution.algorithm,
            "seed_nodes": list(solution.seed.nodes),
            "spread": solution.spread,
            "evaluations": solution.evaluations,
            "wall_time_s": solution.wall_time_s,
            "loads": _loads_payload(graph, solution.loads),
        },
    )
    print(f"{solution.algorithm}: seed {list(solution.seed.nodes)}, spread {solution.spread:.6g}, "
          f"{solution.evaluations} evaluations, {solution.wall_time_s:.3f}s")
    return EXIT_OK


# --- simulate ----------------------------------------------------------


def _cmd_simulate(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    nodes = _parse_int_list(args.seed_nodes, "--seed-nodes")
    for v in nodes:
        if not graph.has_node(v):
            raise ValueError(f"seed node {v} is not in the graph")
    seed = SeedSet(tuple(nodes), args.L)
    sim = simulate(seed, graph, args.tau, args.trials, args.rng_seed, method=args.method)
    expected = propagate(seed, graph, args.tau)
    report = compare(sim, expected, gamma=args.gamma)
    _write_json(
        args.out,
        {
            "artifact": "simulation_report",
            "config": _config_dict(args),
            "trials": sim.trials,
            "rng_seed": sim.rng_seed,
            "method": sim.method,
            "mean_loads": _loads_payload(graph, sim.mean_loads),
            "std_loads": _loads_payload(graph, sim.std_loads),
            "expected_loads": _loads_payload(graph, expected),
            "comparison": report.as_dict(),
        },
    )
    flag = " (low confidence)" if report.low_confidence else ""
    print(f"simulated {sim.trials} trials: max |mean - expected| = "
          f"{report.max_abs_deviation:.6g}{flag}")
    return EXIT_OK


# --- export ------------------------------------------------------------


def _load_grid_sidecar(graph_path: str, override: str | None) -> Grid | None:
    path = override if override is not None else graph_path + ".json"
    if not os.path.exists(path):
        return None
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    g = payload.get("grid")
    if not g:
        return None
    return Grid(
        origin_lat=float(g["origin_lat"]),
        origin_lon=float(g["origin_lon"]),
        cell_size_m=float(g["cell_size_m"]),
        n_rows=int(g["n_rows"]),
        n_cols=int(g["n_cols"]),
    )


def _cell_polygon(grid: Grid, row: int, col: int) -> list[list[float]]:
    s = grid.cell_size_m
    corners_local = [
        (col * s, row * s),
        ((col + 1) * s, row * s),
        ((col + 1) * s, (row + 1) * s),
        (col * s, (row + 1) * s),
        (col * s, row * s),
    ]
    ring = []
    for x, y in corners_local:
        lat, lon = grid.latlon_of_local(x, y)
        ring.append([lon, lat])
    return [ring]


def _cmd_export(args: argparse.Namespace) -> int:
    with open(args.solution, encoding="utf-8") as fh:
        solution = json.load(fh)
    graph = load_graph(args.graph)
    payload = solution.get("loads", {})
    if list(payload.get("node_ids", [])) != list(graph.node_ids):
        raise ValueError("solution loads do not match the graph's node set")
    loads = np.array(payload["values"], dtype=np.float64)
    seed_nodes = [int(v) for v in solution.get("seed_nodes", [])]

    override = [float(x) for x in args.bins.split(",")] if args.bins else None
    edges = bin_edges(float(loads.max()) if loads.size else 0.0, override)
    bins = assign_bins(loads, edges)
    meta = graph.node_meta
    config = _config_dict(args)

    wrote_geojson = False
    if args.format == "geojson":
        grid = _load_grid_sidecar(args.graph, args.grid_json)
        if grid is None or not meta:
            print(
                f"warning: no cell geometry for {args.graph} "
                f"(missing sidecar or node coordinates); writing CSV instead",
                file=sys.stderr,
            )
        else:
            features = []
            for i, v in enumerate(graph.node_ids):
                row, col = meta[v]
                features.append(
                    {
                        "type": "Feature",
                        "geometry": {"type": "Polygon", "coordinates": _cell_polygon(grid, row, col)},
                        "properties": {
                            "node_id": v,
                            "row": row,
                            "col": col,
                            "load": float(loads[i]),
                            "bin": int(bins[i]),
                            "seed": v in seed_nodes,
                        },
                    }
                )
            _write_json(
                args.out,
                {
                    "type": "FeatureCollection",
                    "config": config,
                    "bin_edges": edges,
                    "features": features,
                },
            )
            wrote_geojson = True

    if not wrote_geojson:
        rows = []
        for i, v in enumerate(graph.node_ids):
            row, col = meta.get(v, (-1, -1))
            rows.append(f"{v},{row},{col},{loads[i]:.12g}")
        _write_csv(args.out, ["node_id", "row", "col", "load"], rows, config)

    if args.heatmap:
        if not meta:
            print(
                f"warning: no cell coordinates in {args.graph}; heatmap skipped",
                file=sys.stderr,
            )
        else:
            n_rows = max(rc[0] for rc in meta.values()) + 1
            n_cols = max(rc[1] for rc in meta.values()) + 1
            render_heatmap(
                (n_rows, n_cols),
                [meta[v] for v in graph.node_ids],
                loads,
                [meta[v] for v in seed_nodes if v in meta],
                args.heatmap,
                edges=edges,
            )
            print(f"wrote heatmap {args.heatmap}")

    print(f"wrote {args.out}")
    return EXIT_OK


# --- bench -------------------------------------------------------------


_BENCH_SOLVERS = {
    "greedy": greedy_select,
    "lazy": lazy_greedy_select,
    "brute": brute_force_select,
}


def _cmd_bench(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    objective = _objective_from_args(args)
    ks = _parse_int_list(args.k, "--k")
    taus = _parse_int_list(args.tau, "--tau")
    algorithms = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for a in algorithms:
        if a not in _BENCH_SOLVERS:
            raise ValueError(f"unknown bench algorithm {a!r} (choose from {sorted(_BENCH_SOLVERS)})")

    rows: list[str] = []
    plot_rows: list[dict] = []
    for tau in taus:
        operator = build_operator(graph, tau)
        for algorithm in algorithms:
            solver = _BENCH_SOLVERS[algorithm]
            for k in ks:
                inst = ProblemInstance(
                    graph=graph, objective=objective, k=k, bikes_per_node=args.L, tau=tau
                )
                for _ in range(args.repeats):
                    solution = solver(inst, operator=operator)
                    rows.append(
                        f"{algorithm},{k},{tau},{graph.n},{graph.m},"
                        f"{solution.evaluations},{solution.spread:.12g},{solution.wall_time_s:.6f}"
                    )
                    label = algorithm if len(taus) == 1 else f"{algorithm} tau={tau}"
                    plot_rows.append(
                        {"algorithm": label, "k": k, "wall_time_s": solution.wall_time_s}
                    )

    config = _config_dict(args)
    _write_csv(
        args.out,
        ["algorithm", "k", "tau", "n", "m", "evaluations", "spread", "wall_time_s"],
        rows,
        config,
    )
    plot_path = args.plot if args.plot else os.path.splitext(args.out)[0] + ".png"
    render_bench(plot_rows, plot_path, title=f"n={graph.n}, m={graph.m}")
    print(f"wrote {args.out} and {plot_path} ({len(rows)} runs)")
    return EXIT_OK


# --- parser ------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bikeflow",
        description="Probabilistic bike-mobility graphs: build, seed, diffuse, evaluate.",
    )
    parser.add_argument("--version", action="version", version=f"bikeflow {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--threads", type=int, default=None,
                       help="thread-count hint recorded in artifacts; "
                            "set BIKEFLOW_THREADS before launch to bound BLAS threads")

    p = sub.add_parser("build-graph", help="build a mobility graph from ride records")
    p.add_argument("--rides", required=True, help="rides CSV file")
    p.add_argument("--cell-size", type=int, choices=[100, 500], required=True,
                   help="grid cell size in meters")
    p.add_argument("--window", required=True,
                   help="time-of-day window: morning, evening, or HH:MM-HH:MM")
    p.add_argument("--prune", type=float, default=0.0,
                   help="edge-probability pruning threshold eta (default 0)")
    p.add_argument("--origin", default=None, help="grid origin 'lat,lon' (default: derived)")
    p.add_argument("--rows", type=int, default=None, help="grid row count (with --origin)")
    p.add_argument("--cols", type=int, default=None, help="grid column count (with --origin)")
    p.add_argument("--out", required=True, help="output graph file")
    common(p)
    p.set_defaults(handler=_cmd_build_graph)

    gen = sub.add_parser("gen", help="generate a problem instance")
    gensub = gen.add_subparsers(dest="gen_kind", required=True)

    p = gensub.add_parser("random", help="random stochastic graph")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--avg-out-degree", type=float, default=4.0)
    p.add_argument("--self-loop-min", type=float, default=0.05)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(handler=_cmd_gen_random)

    p = gensub.add_parser("mds", help="dominating-set reduction instance (threshold objective)")
    p.add_argument("--n", type=int, required=True, help="vertex count of the regular graph")
    p.add_argument("--d", type=int, default=3, help="vertex degree (>= 3)")
    p.add_argument("--k", type=int, required=True, help="dominating-set size budget")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(handler=_cmd_gen_mds)

    p = gensub.add_parser("x3c", help="exact-cover reduction instance (sqrt objective)")
    p.add_argument("--q", type=int, required=True, help="universe size / 3")
    p.add_argument("--r", type=int, required=True, help="number of 3-element subsets")
    p.add_argument("--plant-cover", action="store_true", help="guarantee a yes-instance")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(handler=_cmd_gen_x3c)

    p = sub.add_parser("solve", help="select a seed set maximizing the spread")
    p.add_argument("--graph", required=True)
    p.add_argument("--objective", choices=["threshold", "sqrt"], required=True)
    p.add_argument("--gamma", type=float, default=None, help="threshold for the threshold objective")
    p.add_argument("--k", type=int, required=True, help="number of seed nodes")
    p.add_argument("--L", type=int, required=True, help="bikes per seed node")
    p.add_argument("--tau", type=int, required=True, help="diffusion steps")
    p.add_argument("--algorithm", choices=["greedy", "lazy", "brute", "random", "degree"],
                   default="greedy")
    p.add_argument("--rng-seed", type=int, default=0, help="seed for the random baseline")
    p.add_argument("--brute-cap", type=int, default=BRUTE_FORCE_CAP,
                   help="maximum spread evaluations brute force may attempt")
    p.add_argument("--out", required=True, help="output solution JSON")
    common(p)
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("simulate", help="Monte Carlo validation of a seed placement")
    p.add_argument("--graph", required=True)
    p.add_argument("--seed-nodes", required=True, help="comma-separated node ids")
    p.add_argument("--L", type=int, required=True, help="bikes per seed node")
    p.add_argument("--tau", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--method", choices=["multinomial", "per_bike"], default="multinomial")
    p.add_argument("--gamma", type=float, default=1.0,
                   help="threshold used for the report's threshold-spread comparison")
    p.add_argument("--out", required=True, help="output report JSON")
    common(p)
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("export", help="export solution loads as GeoJSON or CSV")
    p.add_argument("--solution", required=True, help="solution JSON from solve")
    p.add_argument("--graph", required=True)
    p.add_argument("--format", choices=["geojson", "csv"], required=True)
    p.add_argument("--bins", default=None,
                   help="four comma-separated bin edges (default: equal-width over the load range)")
    p.add_argument("--grid-json", default=None,
                   help="grid sidecar JSON (default: <graph>.json)")
    p.add_argument("--heatmap", default=None, help="also render a heatmap PNG to this path")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(handler=_cmd_export)

    p = sub.add_parser("bench", help="time solvers across seed sizes and horizons")
    p.add_argument("--graph", required=True)
    p.add_argument("--objective", choices=["threshold", "sqrt"], required=True)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--k", required=True, help="comma-separated seed sizes, e.g. 2,4,8,16,32")
    p.add_argument("--tau", default="2", help="comma-separated step counts (default 2)")
    p.add_argument("--L", type=int, default=100, help="bikes per seed node (default 100)")
    p.add_argument("--algorithms", default="greedy,lazy",
                   help="comma-separated subset of greedy,lazy,brute")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--plot", default=None, help="figure path (default: <out>.png)")
    p.add_argument("--out", required=True, help="output CSV")
    common(p)
    p.set_defaults(handler=_cmd_bench)

    return parser


def run(argv: list[str] | None = None) -> int:
    """Parse arguments, execute one subcommand, return the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.handler(args)
    except BruteForceCapError as exc:
        print(f"bikeflow: refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (GraphFormatError, OutOfAreaError, ValueError, KeyError) as exc:
        message = exc.args[0] if exc.args else exc
        print(f"bikeflow: error: {message}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"bikeflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run(sys.argv[1:]))
