"""Dense active-set QP solver with a compiled hot kernel and a pure-Python
fallback selected at import time."""

from .backend import active_backend, available_backends, get_core
from .problem import (MAX_ITERATIONS, NUMERICAL_FAILURE, OPTIMAL, QpProblem,
                      QpResult, dump_problem, solve_qp)

__all__ = [
    "QpProblem", "QpResult", "solve_qp", "dump_problem",
    "OPTIMAL", "MAX_ITERATIONS", "NUMERICAL_FAILURE",
    "active_backend", "available_backends", "get_core",
]
