"""Exact subproblem solvers: bounded-variable LP, branch-and-bound MILP,
and convex QP over a vertex simplex.  All solvers are stateless between
calls and deterministic on identical inputs."""

from .lp import LpProblem, LpSolution, solve_lp
from .milp import MilpSolution, solve_milp
from .simplex_qp import SimplexQpProblem, solve_simplex_qp
from .tolerances import DEFAULT_TOLERANCES, SolverTolerances

__all__ = [
    "LpProblem",
    "LpSolution",
    "solve_lp",
    "MilpSolution",
    "solve_milp",
    "SimplexQpProblem",
    "solve_simplex_qp",
    "SolverTolerances",
    "DEFAULT_TOLERANCES",
]
