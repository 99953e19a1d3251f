"""Trainers for the extended binary problem."""
from ._backend import BACKENDS, DEFAULT as DEFAULT_BACKEND, get_backend
from .primal import PrimalSolution, primal_objective_linear, solve_primal
from .smo import DualSolution, ExtendedProblem, SolveDiagnostics, kkt_report, solve_smo

__all__ = [
    "BACKENDS", "DEFAULT_BACKEND", "DualSolution", "ExtendedProblem", "PrimalSolution",
    "SolveDiagnostics", "get_backend", "kkt_report", "primal_objective_linear",
    "solve_primal", "solve_smo",
]
