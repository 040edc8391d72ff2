"""Variance-reduced accelerated operator-splitting solvers for generalized
equations, the estimators driving them, baseline methods, model problems, and
a reproducible benchmark harness."""

from ._backend import backend_name
from .core import (
    ConfigurationError,
    DimensionMismatch,
    GeProblem,
    SplitConstants,
    bfs_residual,
    check_cocoercivity,
    check_resolvent_nonexpansive,
    compute_split_constants,
    fbs_residual,
)
from .data import RunTrace, SparseDataset, parse_libsvm, read_trace_csv, write_trace_csv
from .estimators import EstimatorConfig, build_schedule, hsgd_tau_schedule, make_estimator
from .prox import Block, BlockResolvent, project_simplex, prox_l1, prox_scad
from .solvers import (
    AccelParams,
    BackwardForwardAccel,
    ForwardBackwardAccel,
    run_solver,
    schedule_tk_etak,
)

__version__ = "0.1.0"

__all__ = [
    "AccelParams",
    "BackwardForwardAccel",
    "Block",
    "BlockResolvent",
    "ConfigurationError",
    "DimensionMismatch",
    "EstimatorConfig",
    "ForwardBackwardAccel",
    "GeProblem",
    "RunTrace",
    "SparseDataset",
    "SplitConstants",
    "backend_name",
    "bfs_residual",
    "build_schedule",
    "check_cocoercivity",
    "check_resolvent_nonexpansive",
    "compute_split_constants",
    "fbs_residual",
    "hsgd_tau_schedule",
    "make_estimator",
    "parse_libsvm",
    "project_simplex",
    "prox_l1",
    "prox_scad",
    "read_trace_csv",
    "run_solver",
    "schedule_tk_etak",
    "write_trace_csv",
]
