"""Convex QP over the unit simplex of a vertex set.

The objective is parameterized directly in the simplex weights:

    minimize  lam' quad lam + linear . lam + constant,   lam in the unit simplex,

with `quad` PSD.  Solved by pairwise mass exchange between the coordinate
with the smallest gradient and the worst support coordinate (exact line
search each step), which handles the degenerate quad == 0 case uniformly.
Optimality is certified by the Frank-Wolfe gap, which bounds the objective
error on the simplex; an equality-KKT polish on the final support sharpens
the solution to near machine precision when the reduced system is regular.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import MaxInnerIterations
from .tolerances import DEFAULT_TOLERANCES


@dataclass
class SimplexQpProblem:
    vertices: np.ndarray            # (K, n): vertex per row
    quad: np.ndarray                # (K, K) PSD weight-space quadratic
    linear: np.ndarray              # (K,)
    constant: float = 0.0
    start_weights: np.ndarray | None = None

    def __post_init__(self):
        self.vertices = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        self.quad = np.asarray(self.quad, dtype=float)
        self.linear = np.asarray(self.linear, dtype=float)
        if self.start_weights is not None:
            self.start_weights = np.asarray(self.start_weights, dtype=float)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    def objective(self, lam):
        return float(lam @ self.quad @ lam + self.linear @ lam + self.constant)

    def gradient(self, lam):
        return 2.0 * (self.quad @ lam) + self.linear


def _fw_gap(lam, grad):
    return float(lam @ grad - np.min(grad))


def _start(prob):
    k = prob.n_vertices
    w = prob.start_weights
    if w is None or w.shape != (k,) or np.any(w < -1e-9) or abs(w.sum() - 1.0) > 1e-6:
        return np.full(k, 1.0 / k)
    w = np.maximum(w, 0.0)
    return w / w.sum()


def _polish(prob, lam, value):
    """Solve the equality-KKT system on the support; keep it only if it stays
    feasible and does not worsen the objective."""
    support = np.flatnonzero(lam > 1e-12)
    s = support.size
    if s == 0:
        return lam, value
    kkt = np.zeros((s + 1, s + 1))
    kkt[:s, :s] = 2.0 * prob.quad[np.ix_(support, support)]
    kkt[:s, s] = 1.0
    kkt[s, :s] = 1.0
    rhs = np.zeros(s + 1)
    rhs[:s] = -prob.linear[support]
    rhs[s] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        return lam, value
    mu = sol[:s]
    if np.any(mu < -1e-12):
        return lam, value
    cand = np.zeros_like(lam)
    cand[support] = np.maximum(mu, 0.0)
    total = cand.sum()
    if not np.isfinite(total) or abs(total - 1.0) > 1e-9:
        return lam, value
    cand /= total
    cand_value = prob.objective(cand)
    if cand_value <= value + 1e-14 * (1.0 + abs(value)):
        return cand, cand_value
    return lam, value


def solve_simplex_qp(prob: SimplexQpProblem, tol=None, max_iter=None,
                     tolerances=DEFAULT_TOLERANCES):
    """Returns (lam, x = vertices' combination, value) with the Frank-Wolfe
    gap at lam below `tol` (default from the tolerance record)."""
    if prob.n_vertices == 0:
        raise ValueError("vertex list must be nonempty")
    gap_tol = tolerances.qp_gap if tol is None else float(tol)
    cap = tolerances.qp_iteration_limit if max_iter is None else int(max_iter)

    lam = _start(prob)
    k = prob.n_vertices
    if k == 1:
        lam = np.array([1.0])
        x = prob.vertices[0].copy()
        return lam, x, prob.objective(lam)

    for _ in range(cap):
        grad = prob.gradient(lam)
        if _fw_gap(lam, grad) <= gap_tol:
            break
        a = int(np.argmin(grad))
        support = np.flatnonzero(lam > 0.0)
        b = int(support[np.argmax(grad[support])])
        if a == b:
            break
        slope = grad[a] - grad[b]
        if slope >= 0.0:
            break
        curv = 2.0 * (prob.quad[a, a] + prob.quad[b, b] - 2.0 * prob.quad[a, b])
        if curv > 1e-300:
            step = min(lam[b], -slope / curv)
        else:
            step = lam[b]
        if step >= lam[b]:
            step = lam[b]
            lam[b] = 0.0
        else:
            lam[b] -= step
        lam[a] += step
    else:
        raise MaxInnerIterations(
            f"simplex QP gap {_fw_gap(lam, prob.gradient(lam)):.2e} "
            f"above {gap_tol:.2e} after {cap} iterations"
        )

    value = prob.objective(lam)
    lam, value = _polish(prob, lam, value)
    x = prob.vertices.T @ lam
    return lam, x, value
