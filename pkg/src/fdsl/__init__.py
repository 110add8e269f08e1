"""Functional-discrete eigen-solver for Sturm-Liouville problems with a point interaction."""

from .core import (
    Callback,
    InverseSqrt,
    Polynomial,
    ProblemSpec,
    eval_nonlinearity,
    eval_potential,
    get_precision,
    precision,
    q_l1_norm,
    set_precision,
)
from .basic import BasicSolution, solve_basic
from .solver import FDSolution, run_fd

__all__ = [
    "BasicSolution",
    "Callback",
    "FDSolution",
    "InverseSqrt",
    "Polynomial",
    "ProblemSpec",
    "eval_nonlinearity",
    "eval_potential",
    "get_precision",
    "precision",
    "q_l1_norm",
    "run_fd",
    "set_precision",
    "solve_basic",
]
