"""Dense bounded-variable two-phase simplex.

Small LPs only: every structural variable carries finite bounds, rows are
dense, and the basis is refactorized each iteration.  Pivoting is Dantzig
(most negative reduced cost, ties to the lowest index) with a permanent
switch to Bland's rule once the objective stalls, which guarantees
termination on degenerate problems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalFailure
from .tolerances import DEFAULT_TOLERANCES

_BASIC, _AT_LOWER, _AT_UPPER = 0, 1, 2


@dataclass
class LpProblem:
    """min objective . x  s.t.  rows x rel rhs,  lb <= x <= ub (finite)."""

    objective: np.ndarray
    rows: np.ndarray
    relations: tuple
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        n = self.objective.shape[0]
        rows = np.asarray(self.rows, dtype=float)
        if rows.size == 0:
            rows = rows.reshape(0, n)
        self.rows = rows
        self.relations = tuple(self.relations)
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)

    @property
    def n_vars(self):
        return self.objective.shape[0]

    @property
    def n_rows(self):
        return self.rows.shape[0]


@dataclass
class LpSolution:
    x: np.ndarray | None
    value: float
    status: str                     # "optimal" | "infeasible"
    duals: np.ndarray | None = None  # row marginals d(value)/d(rhs)


def _slack_bounds(rel):
    if rel == "<=":
        return 0.0, np.inf
    if rel == ">=":
        return -np.inf, 0.0
    if rel == "=":
        return 0.0, 0.0
    raise ValueError(f"unknown relation {rel!r}")


class _Simplex:
    def __init__(self, prob: LpProblem, tol):
        self.tol = tol
        n, m = prob.n_vars, prob.n_rows
        self.n_struct, self.m = n, m

        slack_lo = np.empty(m)
        slack_hi = np.empty(m)
        for r, rel in enumerate(prob.relations):
            slack_lo[r], slack_hi[r] = _slack_bounds(rel)

        x0 = prob.lb.copy()
        natural = prob.rhs - prob.rows @ x0

        art_rows, art_signs = [], []
        basis = np.empty(m, dtype=int)
        slack_status = np.empty(m, dtype=int)
        slack_value = np.zeros(m)
        for r in range(m):
            v = natural[r]
            if slack_lo[r] - 1e-12 <= v <= slack_hi[r] + 1e-12:
                basis[r] = n + r
                slack_status[r] = _BASIC
            else:
                s0 = min(max(v, slack_lo[r]), slack_hi[r])
                slack_status[r] = _AT_LOWER if s0 == slack_lo[r] else _AT_UPPER
                slack_value[r] = s0
                art_signs.append(1.0 if v - s0 > 0 else -1.0)
                art_rows.append(r)
                basis[r] = n + m + len(art_rows) - 1

        n_art = len(art_rows)
        total = n + m + n_art
        cols = np.zeros((m, total))
        cols[:, :n] = prob.rows
        for r in range(m):
            cols[r, n + r] = 1.0
        for a, (r, s) in enumerate(zip(art_rows, art_signs)):
            cols[r, n + m + a] = s

        self.cols = cols
        self.rhs = prob.rhs
        self.lo = np.concatenate([prob.lb, slack_lo, np.zeros(n_art)])
        self.hi = np.concatenate([prob.ub, slack_hi, np.full(n_art, np.inf)])
        self.status = np.concatenate(
            [
                np.full(n, _AT_LOWER, dtype=int),
                slack_status,
                np.full(n_art, _BASIC, dtype=int),
            ]
        )
        self.basis = basis
        self.n_art = n_art
        self.art_index = np.arange(n + m, total)
        self.prob = prob

    # -- core machinery -------------------------------------------------

    def _nonbasic_values(self):
        v = np.where(self.status == _AT_UPPER, self.hi, self.lo)
        v[self.status == _BASIC] = 0.0
        # fixed variables at lower == upper are stored at their single value
        return v

    def _solve_basis(self, rhs_vec, transpose=False):
        if self.m == 0:
            return np.zeros(0)
        B = self.cols[:, self.basis]
        try:
            return np.linalg.solve(B.T if transpose else B, rhs_vec)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure(f"singular basis: {exc}") from None

    def _values(self):
        val = self._nonbasic_values()
        if self.m:
            resid = self.rhs - self.cols @ val
            val[self.basis] = self._solve_basis(resid)
        return val

    def run(self, cost):
        tol = self.tol
        bland = False
        stall = 0
        last_obj = np.inf
        for _ in range(tol.lp_iteration_limit):
            val = self._values()
            obj = float(cost @ val)
            if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
                stall = 0
            else:
                stall += 1
                if stall > tol.lp_stall_limit:
                    bland = True
            last_obj = obj

            y = self._solve_basis(cost[self.basis], transpose=True)
            reduced = cost - self.cols.T @ y

            entering, sigma = self._pick_entering(reduced, bland)
            if entering < 0:
                return val, obj, y

            w = self._solve_basis(self.cols[:, entering])
            step, leave_pos = self._ratio_test(val, entering, sigma, w)
            if step is None:
                raise NumericalFailure("unbounded direction in bounded LP")

            if leave_pos < 0:
                # bound flip: entering jumps to its opposite bound
                self.status[entering] = _AT_UPPER if sigma > 0 else _AT_LOWER
            else:
                leaving = self.basis[leave_pos]
                new_val = val[leaving] - sigma * step * w[leave_pos]
                lo, hi = self.lo[leaving], self.hi[leaving]
                self.status[leaving] = (
                    _AT_LOWER if abs(new_val - lo) <= abs(new_val - hi) else _AT_UPPER
                )
                self.basis[leave_pos] = entering
                self.status[entering] = _BASIC
        raise NumericalFailure("simplex iteration limit reached")

    def _pick_entering(self, reduced, bland):
        tol = self.tol.lp_pivot
        best, best_score, best_sigma = -1, tol, 0
        for j in range(self.cols.shape[1]):
            st = self.status[j]
            if st == _BASIC or self.lo[j] == self.hi[j]:
                continue
            d = reduced[j]
            if st == _AT_LOWER and d < -tol:
                score = -d
                sigma = 1
            elif st == _AT_UPPER and d > tol:
                score = d
                sigma = -1
            else:
                continue
            if bland:
                return j, sigma
            if score > best_score:
                best, best_score, best_sigma = j, score, sigma
        return best, best_sigma

    def _ratio_test(self, val, entering, sigma, w):
        """Largest step for the entering variable; returns (step, basis position
        of the leaving variable) with position -1 meaning a bound flip."""
        piv = self.tol.lp_pivot
        best = self.hi[entering] - self.lo[entering]
        leave_pos = -1
        for i in range(self.m):
            bi = self.basis[i]
            rate = sigma * w[i]
            if rate > piv:
                if self.lo[bi] == -np.inf:
                    continue
                cap = max((val[bi] - self.lo[bi]) / rate, 0.0)
            elif rate < -piv:
                if self.hi[bi] == np.inf:
                    continue
                cap = max((self.hi[bi] - val[bi]) / (-rate), 0.0)
            else:
                continue
            if cap < best - 1e-12:
                best, leave_pos = cap, i
            elif leave_pos >= 0 and cap <= best + 1e-12 and bi < self.basis[leave_pos]:
                leave_pos = i  # tie: lowest variable index leaves
        if not np.isfinite(best):
            return None, -1
        return best, leave_pos


def solve_lp(prob: LpProblem, tol=DEFAULT_TOLERANCES) -> LpSolution:
    """Solve a bounded-variable LP; returns an optimal basic solution or
    `infeasible`, with row duals (marginals w.r.t. the right-hand side)."""
    if np.any(~np.isfinite(prob.lb)) or np.any(~np.isfinite(prob.ub)):
        raise ValueError("all structural variables need finite bounds")
    if np.any(prob.lb > prob.ub + 1e-12):
        return LpSolution(None, np.inf, "infeasible")

    sx = _Simplex(prob, tol)
    if sx.n_art:
        phase1 = np.zeros(sx.cols.shape[1])
        phase1[sx.art_index] = 1.0
        _, infeas, _ = sx.run(phase1)
        if infeas > tol.lp_feasibility:
            return LpSolution(None, np.inf, "infeasible")
        # pin the artificials at zero for phase 2
        sx.lo[sx.art_index] = 0.0
        sx.hi[sx.art_index] = 0.0

    cost = np.zeros(sx.cols.shape[1])
    cost[: prob.n_vars] = prob.objective
    val, obj, duals = sx.run(cost)

    x = val[: prob.n_vars]
    _check_residuals(prob, x, tol)
    return LpSolution(x, float(prob.objective @ x), "optimal", duals)


def _check_residuals(prob, x, tol):
    t = tol.lp_feasibility
    if np.any(x < prob.lb - t) or np.any(x > prob.ub + t):
        raise NumericalFailure("bound violation above tolerance")
    if prob.n_rows:
        lhs = prob.rows @ x
        for r, rel in enumerate(prob.relations):
            resid = lhs[r] - prob.rhs[r]
            bad = (
                (rel == "<=" and resid > t)
                or (rel == ">=" and resid < -t)
                or (rel == "=" and abs(resid) > t)
            )
            if bad:
                raise NumericalFailure(f"row {r} residual {resid:.2e} above tolerance")
