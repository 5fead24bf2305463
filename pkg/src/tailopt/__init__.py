"""Tail-latency bounds, scheduling/placement optimization, and fork-join
simulation for erasure-coded distributed storage."""

from .bounds import (
    BoundReport,
    bound_report,
    file_tail_bound,
    file_tail_bounds,
    lst_tail_bound,
    mgf_shifted_exp,
    sojourn_mgf,
    stability_margin,
    t_max,
    weighted_objective,
)
from .model import (
    FileClass,
    ModelError,
    NodeParams,
    SystemModel,
    aggregate_arrival,
    load_scenario,
    traffic_intensity,
    validate_system,
)
from .optimizer import (
    OptimizerOptions,
    PolicyKind,
    Solution,
    alternating_optimize,
    baseline_policy,
)
from .projection import nearest_feasible_init, project_capped_simplex, project_feasible
from .scenarios import builtin_table1_scenario
from .sim import SimConfig, SimResult, empirical_tail, run_simulation, sample_access_set

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "bound_report", "file_tail_bound", "file_tail_bounds",
    "lst_tail_bound", "mgf_shifted_exp", "sojourn_mgf", "stability_margin",
    "t_max", "weighted_objective",
    "FileClass", "ModelError", "NodeParams", "SystemModel",
    "aggregate_arrival", "load_scenario", "traffic_intensity", "validate_system",
    "OptimizerOptions", "PolicyKind", "Solution", "alternating_optimize",
    "baseline_policy",
    "nearest_feasible_init", "project_capped_simplex", "project_feasible",
    "builtin_table1_scenario",
    "SimConfig", "SimResult", "empirical_tail", "run_simulation",
    "sample_access_set",
]
