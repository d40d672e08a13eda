"""Central tolerance/limit record for all subproblem solvers."""

from dataclasses import dataclass


@dataclass(frozen=True)
class SolverTolerances:
    lp_feasibility: float = 1e-8     # row/bound residual accepted as feasible
    lp_pivot: float = 1e-9           # reduced-cost and pivot magnitude threshold
    lp_stall_limit: int = 50         # degenerate pivots before Bland's rule kicks in
    lp_iteration_limit: int = 50_000
    milp_integrality: float = 1e-7
    milp_prune_eps: float = 1e-9     # bound slack when fathoming nodes
    milp_node_limit: int = 1_000_000
    qp_gap: float = 1e-10            # KKT (Frank-Wolfe) gap target on the simplex
    qp_iteration_limit: int = 100_000
    vertex_dedup: float = 1e-9       # inf-norm distance treated as the same vertex


DEFAULT_TOLERANCES = SolverTolerances()
