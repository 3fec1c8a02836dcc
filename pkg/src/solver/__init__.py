"""Primal-dual interior-point solver for the smooth NLPs built in ``src.formulations``."""

from src.solver.derivatives import DerivativeCheck, check_derivatives
from src.solver.ipm import InteriorPointSolver, solve
from src.solver.options import IterationLog, SolveOutcome, SolverOptions, SolveStatus

__all__ = [
    "DerivativeCheck",
    "InteriorPointSolver",
    "IterationLog",
    "SolveOutcome",
    "SolveStatus",
    "SolverOptions",
    "check_derivatives",
    "solve",
]
