"""One round of the inner-approximated nonlinear Gauss-Seidel step.

Alternates an exact x-minimization over the convex hull of the per-block
vertex sets with the closed-form z-projection, then solves the linearized
direction subproblems (block MILPs) to measure the stationarity gap and to
grow the vertex sets.  Also ships the Armijo backtracking step used by the
property tests of the sufficient-decrease behaviour.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model
from .errors import InfeasibleBlock, NondescentDirection, NumericalFailure
from .subsolvers import (
    DEFAULT_TOLERANCES,
    LpProblem,
    SimplexQpProblem,
    solve_milp,
    solve_simplex_qp,
)


@dataclass
class InnerApprox:
    """Per-block vertex lists whose convex hulls inner-approximate conv(X_i).

    `weights` carries the most recent hull coordinates of the current
    iterate, aligned with `vertices`; it is bookkeeping for warm starts and
    for the trimming policy, not part of the approximation itself.
    """

    vertices: list
    weights: list | None = None

    @classmethod
    def from_points(cls, points):
        return cls(
            vertices=[[np.array(p, dtype=float)] for p in points],
            weights=[np.array([1.0]) for _ in points],
        )

    def copy(self):
        return InnerApprox(
            vertices=[[v.copy() for v in vs] for vs in self.vertices],
            weights=None if self.weights is None else [w.copy() for w in self.weights],
        )

    def counts(self):
        return [len(vs) for vs in self.vertices]


@dataclass
class SdmGsResult:
    x: list                  # hull iterate per block
    z: np.ndarray            # its Z-projection image
    vertex_set: InnerApprox  # expanded approximation
    gap: float               # nonnegative linearized stationarity gap
    direction_point: list | None = None  # per-block linearized-subproblem optimizers


def block_restriction(block, omega_i, rho, z_i, vertices) -> SimplexQpProblem:
    """Weight-space quadratic of the penalized block objective restricted to
    x = sum_v lam_v v over the given vertices."""
    V = np.vstack([np.asarray(v, dtype=float) for v in vertices])
    G = V @ block.coupling.T  # row v -> Q_i v
    quad = (V * block.cost_quad_diag) @ V.T + 0.5 * rho * (G @ G.T)
    linear = V @ block.cost_linear + G @ (omega_i - rho * z_i)
    const = block.cost_constant + 0.5 * rho * float(z_i @ z_i)
    return SimplexQpProblem(V, quad, linear, const)


def gs_x_update(inst, D: InnerApprox, z_tilde, omega, rho, tol=DEFAULT_TOLERANCES):
    """Blockwise exact minimization over conv(D_i) at fixed z; warm-started
    from D.weights, which is refreshed in place with the new coordinates."""
    z_tilde = np.asarray(z_tilde, dtype=float)
    omega = np.asarray(omega, dtype=float)
    x_new = []
    new_weights = []
    for i, block in enumerate(inst.blocks):
        sl = inst.block_coords(i)
        prob = block_restriction(block, omega[sl], rho, z_tilde[sl], D.vertices[i])
        if D.weights is not None and len(D.weights[i]) == prob.n_vertices:
            prob.start_weights = D.weights[i]
        lam, x_i, _ = solve_simplex_qp(prob, tolerances=tol)
        x_new.append(x_i)
        new_weights.append(lam)
    D.weights = new_weights
    return x_new


def gs_z_update(inst, x_tilde) -> np.ndarray:
    """Exact z-minimization: groupwise averaging of the coupling image."""
    return model.project_onto_Z(inst, model.apply_coupling(inst, x_tilde))


def direction_rows(inst, x_tilde, z_tilde, omega, rho):
    """Per-block linearization rows of the penalized objective at (x, z)."""
    z_tilde = np.asarray(z_tilde, dtype=float)
    omega = np.asarray(omega, dtype=float)
    rows = []
    for i, block in enumerate(inst.blocks):
        sl = inst.block_coords(i)
        shifted = omega[sl] + rho * (block.coupling @ x_tilde[i] - z_tilde[sl])
        rows.append(block.gradient(x_tilde[i]) + block.coupling.T @ shifted)
    return rows


def minimize_block_linear(block, row, tol=DEFAULT_TOLERANCES):
    """Exact MILP minimizer of a linear form over one block's feasible set."""
    m = len(block.constraints)
    rows = np.vstack([c.coeffs for c in block.constraints]) if m else np.zeros((0, block.n_vars))
    prob = LpProblem(
        row,
        rows,
        tuple(c.rel for c in block.constraints),
        np.array([c.rhs for c in block.constraints]),
        block.lb,
        block.ub,
    )
    sol = solve_milp(prob, block.integer, tol)
    if sol.status != "optimal":
        raise InfeasibleBlock("block feasible set is empty")
    return sol.point, sol.objective


def direction_subproblem(inst, x_tilde, z_tilde, omega, rho, tol=DEFAULT_TOLERANCES):
    """Blockwise linearized subproblems; returns their optimizers and the
    total nonnegative gap -grad . (x_hat - x_tilde)."""
    rows = direction_rows(inst, x_tilde, z_tilde, omega, rho)
    x_hat = []
    gap = 0.0
    for i, block in enumerate(inst.blocks):
        point, value = minimize_block_linear(block, rows[i], tol)
        x_hat.append(point)
        gap += float(rows[i] @ x_tilde[i]) - value
    return x_hat, gap


def expand_vertex_set(D: InnerApprox, x_tilde, x_hat, *, blocks=None, cap=None,
                      dedup_tol=None, tol=DEFAULT_TOLERANCES) -> InnerApprox:
    """Append each block's direction point to its vertex list (deduplicated).

    With a cap, surplus non-support vertices are dropped lowest-last-weight
    first; support vertices and the fresh point always survive so the
    segment between the iterate and the direction point stays inside the
    hull.
    """
    eps = tol.vertex_dedup if dedup_tol is None else float(dedup_tol)
    out = D.copy()
    for i, v_new in enumerate(x_hat):
        v_new = np.asarray(v_new, dtype=float)
        if blocks is not None and not blocks[i].point_feasible(v_new):
            raise ValueError(f"block {i}: vertex violates block constraints")
        verts = out.vertices[i]
        w = out.weights[i] if out.weights is not None else np.zeros(len(verts))
        hit = next(
            (k for k, v in enumerate(verts) if np.max(np.abs(v - v_new)) <= eps), None
        )
        if hit is None:
            verts.append(v_new)
            w = np.append(w, 0.0)
        if cap is not None and len(verts) > cap:
            keep = _trim_order(w, fresh=len(verts) - 1 if hit is None else hit, cap=cap)
            out.vertices[i] = [verts[k] for k in keep]
            w = w[keep]
        else:
            out.vertices[i] = verts
        if out.weights is not None:
            out.weights[i] = w
    return out


def _trim_order(weights, fresh, cap):
    """Indices to keep: all support vertices and the fresh one; surplus
    non-support vertices leave in increasing (weight, index) order."""
    n = len(weights)
    protected = {k for k in range(n) if weights[k] > 1e-12}
    protected.add(fresh)
    droppable = sorted(
        (k for k in range(n) if k not in protected),
        key=lambda k: (weights[k], k),
    )
    n_drop = min(len(droppable), max(n - cap, 0))
    dropped = set(droppable[:n_drop])
    return np.array([k for k in range(n) if k not in dropped], dtype=int)


def sdm_gs(inst, omega, rho, x0, z0, D: InnerApprox, t_max, *, cap=None,
           tol=DEFAULT_TOLERANCES) -> SdmGsResult:
    """Run t_max x/z alternations, then one direction solve and vertex-set
    expansion.  The penalized objective never increases across alternations
    provided x0 lies in conv(D) (true whenever D was built by expansion)."""
    if t_max < 1:
        raise ValueError("t_max must be at least 1")
    x = model.copy_point(x0)
    z = np.array(z0, dtype=float)
    for _ in range(t_max):
        x = gs_x_update(inst, D, z, omega, rho, tol)
        z = gs_z_update(inst, x)
    x_hat, gap = direction_subproblem(inst, x, z, omega, rho, tol)
    grown = expand_vertex_set(D, x, x_hat, blocks=inst.blocks, cap=cap, tol=tol)
    return SdmGsResult(x, z, grown, gap, x_hat)


def lagrangian_x_gradient(inst, x, z, omega, rho):
    """Per-block x-gradient of f(x) + omega . Qx + (rho/2)|Qx - z|^2."""
    z = np.asarray(z, dtype=float)
    omega = np.asarray(omega, dtype=float)
    grads = []
    for i, block in enumerate(inst.blocks):
        sl = inst.block_coords(i)
        shifted = omega[sl] + rho * (block.coupling @ x[i] - z[sl])
        grads.append(block.gradient(x[i]) + block.coupling.T @ shifted)
    return grads


def _axpy(x, alpha, d):
    if isinstance(x, (list, tuple)):
        return [np.asarray(xi, dtype=float) + alpha * np.asarray(di, dtype=float)
                for xi, di in zip(x, d)]
    return x + alpha * d


def armijo_step(F, x, z, d, beta, sigma, deriv, max_backtracks=200):
    """Largest alpha in {1, beta, beta^2, ...} with
    F(x + alpha d, z) - F(x, z) <= alpha sigma deriv, where deriv is the
    (negative) directional slope of F at x along d."""
    if not (0.0 < beta < 1.0 and 0.0 < sigma < 1.0):
        raise ValueError("beta and sigma must lie in (0, 1)")
    if deriv >= 0.0:
        raise NondescentDirection(f"directional derivative {deriv} is not negative")
    base = F(x, z)
    alpha = 1.0
    for _ in range(max_backtracks):
        if F(_axpy(x, alpha, d), z) - base <= alpha * sigma * deriv:
            return alpha
        alpha *= beta
    raise NumericalFailure("Armijo backtracking did not terminate")
