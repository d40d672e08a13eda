"""Dual-decomposition solver with inner-approximated augmented Lagrangian steps."""

from .alm import (
    AlmConfig,
    AlmState,
    IterationRecord,
    dual_update,
    eval_L_rho,
    phi_check,
    phi_hat,
    phi_tilde_from_gamma,
    rho_update,
    run_sdm_gs_alm,
    run_subgradient_baseline,
    ssc_ratio,
)
from .cli import generate_instance, parse_instance, speedup_harness, ssc_sweep
from .model import (
    BlockSpec,
    LinearConstraint,
    LinkageStructure,
    ProblemInstance,
    project_onto_Z,
    project_onto_Zperp,
    residual,
    validate_instance,
)
from .oracle import (
    OracleResult,
    enumerate_block_points,
    oracle_result,
    phi_exact,
    solve_cld_exact,
    solve_ld_exact,
    solve_primal_exact,
)
from .parallel import WorkerPartition, deterministic_reduce_sum, run_parallel
from .sdm_gs import (
    InnerApprox,
    SdmGsResult,
    armijo_step,
    direction_subproblem,
    expand_vertex_set,
    gs_x_update,
    gs_z_update,
    sdm_gs,
)
from .subsolvers import (
    DEFAULT_TOLERANCES,
    LpProblem,
    MilpSolution,
    SimplexQpProblem,
    SolverTolerances,
    solve_lp,
    solve_milp,
    solve_simplex_qp,
)

__all__ = [
    "AlmConfig",
    "AlmState",
    "BlockSpec",
    "DEFAULT_TOLERANCES",
    "InnerApprox",
    "IterationRecord",
    "LinearConstraint",
    "LinkageStructure",
    "LpProblem",
    "MilpSolution",
    "OracleResult",
    "ProblemInstance",
    "SdmGsResult",
    "SimplexQpProblem",
    "SolverTolerances",
    "WorkerPartition",
    "armijo_step",
    "deterministic_reduce_sum",
    "direction_subproblem",
    "dual_update",
    "enumerate_block_points",
    "eval_L_rho",
    "expand_vertex_set",
    "generate_instance",
    "gs_x_update",
    "gs_z_update",
    "oracle_result",
    "parse_instance",
    "phi_check",
    "phi_exact",
    "phi_hat",
    "phi_tilde_from_gamma",
    "project_onto_Z",
    "project_onto_Zperp",
    "residual",
    "rho_update",
    "run_parallel",
    "run_sdm_gs_alm",
    "run_subgradient_baseline",
    "sdm_gs",
    "solve_cld_exact",
    "solve_ld_exact",
    "solve_lp",
    "solve_milp",
    "solve_primal_exact",
    "solve_simplex_qp",
    "speedup_harness",
    "ssc_ratio",
    "ssc_sweep",
    "validate_instance",
]

__version__ = "0.1.0"
