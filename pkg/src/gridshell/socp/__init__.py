"""Sparse conic programming: container, embedded solver and external adapter."""

from .external import BackendUnavailable, adapter_solve, resolve_backend, solve_with
from .ipm import solve
from .program import (DUAL_INFEASIBLE, MAX_ITER, OPTIMAL, PRIMAL_INFEASIBLE,
                      ConicError, ConicProgram, ConicSolution, NumericalError,
                      dump_program, load_program)

__all__ = [
    "ConicProgram", "ConicSolution", "ConicError", "NumericalError",
    "solve", "solve_with", "adapter_solve", "resolve_backend", "BackendUnavailable", "dump_program", "load_program",
    "OPTIMAL", "PRIMAL_INFEASIBLE", "DUAL_INFEASIBLE", "MAX_ITER",
]
