"""Probabilistic bike-mobility graphs: build, seed, diffuse, evaluate, validate.

Setting BIKEFLOW_THREADS before launch bounds the numeric libraries' thread
pools; it must be applied before they load, hence here.
"""

import os as _os

_threads = _os.environ.get("BIKEFLOW_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

__version__ = "0.1.0"

from .config import TOL, Tolerances
from .diffusion import (
    SeedSet,
    TransitionOperator,
    build_operator,
    init_loads,
    linearity_decompose,
    one_step_matrix,
    propagate,
    read_loads_csv,
    step,
    write_loads_csv,
)
from .instances import (
    MdsInstance,
    ReductionCertificate,
    X3cInstance,
    has_dominating_set,
    has_exact_cover,
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
    Ride,
    TimeWindow,
    build_graph,
    graphs_close,
    load_graph,
    load_rides,
    prune_graph,
    save_graph,
    snap_point,
)
from .montecarlo import (
    ComparisonReport,
    SimulationResult,
    compare,
    simulate,
    validate_against_engine,
)
from .objectives import SpreadObjective, evaluate, s_spread, t_spread
from .optimizer import (
    BruteForceCapError,
    ProblemInstance,
    Solution,
    baseline_select,
    brute_force_select,
    greedy_select,
    lazy_greedy_select,
)

__all__ = [
    "TOL",
    "Tolerances",
    "SeedSet",
    "TransitionOperator",
    "build_operator",
    "init_loads",
    "linearity_decompose",
    "one_step_matrix",
    "propagate",
    "read_loads_csv",
    "step",
    "write_loads_csv",
    "MdsInstance",
    "ReductionCertificate",
    "X3cInstance",
    "has_dominating_set",
    "has_exact_cover",
    "mds_certificate",
    "mds_to_tbs",
    "random_instance",
    "random_mds_instance",
    "random_x3c_instance",
    "x3c_certificate",
    "x3c_to_sbs",
    "Grid",
    "GraphFormatError",
    "MobilityGraph",
    "OutOfAreaError",
    "Ride",
    "TimeWindow",
    "build_graph",
    "graphs_close",
    "load_graph",
    "load_rides",
    "prune_graph",
    "save_graph",
    "snap_point",
    "ComparisonReport",
    "SimulationResult",
    "compare",
    "simulate",
    "validate_against_engine",
    "SpreadObjective",
    "evaluate",
    "s_spread",
    "t_spread",
    "BruteForceCapError",
    "ProblemInstance",
    "Solution",
    "baseline_select",
    "brute_force_select",
    "greedy_select",
    "lazy_greedy_select",
    "__version__",
]
