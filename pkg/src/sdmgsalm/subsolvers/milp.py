"""Deterministic branch-and-bound over the bounded-variable LP relaxation.

Branching picks the most fractional variable (ties to the lowest index) and
explores depth-first, descending first into the child nearer the fractional
value.  Incumbents are replaced only on strict improvement, so repeated calls
on the same data return the identical point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NodeLimitExceeded
from .lp import LpProblem, LpSolution, solve_lp
from .tolerances import DEFAULT_TOLERANCES


@dataclass
class MilpSolution:
    point: np.ndarray | None
    objective: float
    status: str  # "optimal" | "infeasible"
    nodes: int = 0


def _point_feasible(prob, x, tol):
    t = tol.lp_feasibility
    if np.any(x < prob.lb - t) or np.any(x > prob.ub + t):
        return False
    if prob.n_rows:
        lhs = prob.rows @ x
        for r, rel in enumerate(prob.relations):
            resid = lhs[r] - prob.rhs[r]
            if rel == "<=" and resid > t:
                return False
            if rel == ">=" and resid < -t:
                return False
            if rel == "=" and abs(resid) > t:
                return False
    return True


def solve_milp(prob: LpProblem, integer_mask, tol=DEFAULT_TOLERANCES,
               node_limit=None) -> MilpSolution:
    """Globally optimal mixed-integer minimizer of an LpProblem."""
    mask = np.asarray(integer_mask, dtype=bool)
    if mask.shape != (prob.n_vars,):
        raise ValueError("integer mask length must match variable count")
    limit = tol.milp_node_limit if node_limit is None else int(node_limit)

    int_idx = np.flatnonzero(mask)
    best_x, best_val = None, np.inf
    nodes = 0
    stack = [(prob.lb.copy(), prob.ub.copy())]

    while stack:
        lb, ub = stack.pop()
        if np.any(lb > ub + 1e-12):
            continue
        nodes += 1
        if nodes > limit:
            raise NodeLimitExceeded(f"exceeded {limit} nodes")

        rel = solve_lp(
            LpProblem(prob.objective, prob.rows, prob.relations, prob.rhs, lb, ub),
            tol,
        )
        if rel.status != "optimal":
            continue
        if rel.value >= best_val - tol.milp_prune_eps:
            continue

        frac = np.abs(rel.x[int_idx] - np.round(rel.x[int_idx]))
        if frac.size == 0 or np.max(frac) <= tol.milp_integrality:
            snapped = rel.x.copy()
            snapped[int_idx] = np.round(snapped[int_idx])
            if _point_feasible(prob, snapped, tol):
                cand = float(prob.objective @ snapped)
                if cand < best_val - tol.milp_prune_eps:
                    best_x, best_val = snapped, cand
                continue
            # snapping broke a row (possible only when some frac > 0):
            # fall through and branch, which excludes the relaxation point
            if frac.size == 0 or np.max(frac) == 0.0:
                continue

        j = int(int_idx[int(np.argmax(frac))])
        xj = rel.x[j]
        floor_j = np.floor(xj)
        down_ub = ub.copy()
        down_ub[j] = floor_j
        up_lb = lb.copy()
        up_lb[j] = floor_j + 1.0
        down = (lb.copy(), down_ub)
        up = (up_lb, ub.copy())
        if xj - floor_j <= 0.5:
            stack.append(up)
            stack.append(down)  # popped first: nearer child
        else:
            stack.append(down)
            stack.append(up)

    if best_x is None:
        return MilpSolution(None, np.inf, "infeasible", nodes)
    return MilpSolution(best_x, best_val, "optimal", nodes)
