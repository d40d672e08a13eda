"""Problem data model: block objectives, coupling, and the linkage subspace.

A problem instance is a list of blocks, each owning a convex (diagonal
quadratic or linear) objective over a bounded mixed-integer set, plus a
coupling matrix mapping block variables into a global coordinate space of
size q.  The linkage structure partitions those q coordinates into groups;
the subspace Z consists of the vectors that are constant within each group,
and Z-perp (the dual-feasible multiplier space) of the vectors with zero
group sums.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

RELATIONS = ("<=", "=", ">=")

# A primal point is one vector per block.
PrimalPoint = list


def _as_float_array(x, ndim=1):
    a = np.asarray(x, dtype=float)
    if a.ndim != ndim:
        raise ValueError(f"expected {ndim}-d array, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class LinearConstraint:
    """Single row `coeffs . x REL rhs` with REL one of <=, =, >=."""

    coeffs: np.ndarray
    rel: str
    rhs: float

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _as_float_array(self.coeffs))
        object.__setattr__(self, "rhs", float(self.rhs))
        if self.rel not in RELATIONS:
            raise ValueError(f"unknown relation {self.rel!r}")

    def satisfied_by(self, x, tol=1e-8):
        lhs = float(self.coeffs @ x)
        if self.rel == "<=":
            return lhs <= self.rhs + tol
        if self.rel == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


@dataclass(frozen=True)
class BlockSpec:
    """One block: objective, bounds, integrality, rows, and coupling matrix.

    The objective is f(x) = cost_linear . x + cost_quad_diag . x^2
    + cost_constant, with cost_quad_diag >= 0 so f stays convex.
    `coupling` has one row per owned global coordinate (q_i x n_vars).
    """

    cost_linear: np.ndarray
    cost_quad_diag: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    integer: np.ndarray
    coupling: np.ndarray
    constraints: tuple = ()
    cost_constant: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "cost_linear", _as_float_array(self.cost_linear))
        object.__setattr__(self, "cost_quad_diag", _as_float_array(self.cost_quad_diag))
        object.__setattr__(self, "lb", _as_float_array(self.lb))
        object.__setattr__(self, "ub", _as_float_array(self.ub))
        object.__setattr__(self, "integer", np.asarray(self.integer, dtype=bool))
        q = np.asarray(self.coupling, dtype=float)
        if q.ndim != 2:
            raise ValueError("coupling must be a 2-d matrix")
        object.__setattr__(self, "coupling", q)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        object.__setattr__(self, "cost_constant", float(self.cost_constant))

    @property
    def n_vars(self):
        return self.cost_linear.shape[0]

    @property
    def n_coupling(self):
        return self.coupling.shape[0]

    @property
    def is_linear(self):
        return not np.any(self.cost_quad_diag)

    def objective(self, x):
        x = np.asarray(x, dtype=float)
        return float(self.cost_linear @ x + self.cost_quad_diag @ (x * x) + self.cost_constant)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.cost_linear + 2.0 * self.cost_quad_diag * x

    def point_feasible(self, x, tol=1e-8, int_tol=1e-7):
        """Bounds, rows, and integrality check for a candidate block point."""
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lb - tol) or np.any(x > self.ub + tol):
            return False
        if np.any(np.abs(x[self.integer] - np.round(x[self.integer])) > int_tol):
            return False
        return all(c.satisfied_by(x, tol) for c in self.constraints)


@dataclass(frozen=True)
class LinkageStructure:
    """Disjoint groups of global coordinates; Z = constant-within-group vectors."""

    groups: tuple

    def __post_init__(self):
        norm = tuple(tuple(int(j) for j in g) for g in self.groups)
        object.__setattr__(self, "groups", norm)

    @property
    def n_groups(self):
        return len(self.groups)

    @property
    def n_coords(self):
        return sum(len(g) for g in self.groups)


@dataclass(frozen=True)
class ProblemInstance:
    """Immutable problem data, shareable across workers."""

    name: str
    blocks: tuple
    linkage: LinkageStructure

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def n_blocks(self):
        return len(self.blocks)

    @cached_property
    def q(self):
        """Total coupling dimension (number of global z coordinates)."""
        return int(sum(b.n_coupling for b in self.blocks))

    @cached_property
    def block_offsets(self):
        """Start of each block's coordinate range in the global z index."""
        offs = np.zeros(len(self.blocks) + 1, dtype=int)
        for i, b in enumerate(self.blocks):
            offs[i + 1] = offs[i] + b.n_coupling
        return offs

    def block_coords(self, i):
        """slice of global z coordinates owned by block i."""
        return slice(int(self.block_offsets[i]), int(self.block_offsets[i + 1]))

    @cached_property
    def group_of(self):
        """Map global coordinate -> group index (-1 if unassigned)."""
        owner = np.full(self.q, -1, dtype=int)
        for gi, g in enumerate(self.linkage.groups):
            for j in g:
                if 0 <= j < self.q:
                    owner[j] = gi
        return owner

    @cached_property
    def group_sizes(self):
        return np.array([len(g) for g in self.linkage.groups], dtype=float)

    @cached_property
    def local_groups(self):
        """Per block: group index of each of its local coupling rows."""
        return [self.group_of[self.block_coords(i)].copy() for i in range(self.n_blocks)]


def validate_instance(inst) -> list:
    """Return all invariant violations as strings; empty list means valid."""
    out = []
    if inst.n_blocks < 1:
        out.append("instance: no blocks")
        return out
    for i, b in enumerate(inst.blocks):
        n = b.n_vars
        for name, vec in (
            ("cost_quad_diag", b.cost_quad_diag),
            ("lb", b.lb),
            ("ub", b.ub),
            ("integer", b.integer),
        ):
            if len(vec) != n:
                out.append(f"block {i}: {name} length {len(vec)} != {n}")
        if len(b.lb) == n and len(b.ub) == n:
            for j in range(n):
                if not (np.isfinite(b.lb[j]) and np.isfinite(b.ub[j])):
                    out.append(f"block {i}: unbounded variable {j}")
                elif b.lb[j] > b.ub[j]:
                    out.append(f"block {i}: empty bound range at variable {j}")
        if len(b.cost_quad_diag) == n and np.any(b.cost_quad_diag < 0):
            j = int(np.argmin(b.cost_quad_diag))
            out.append(f"block {i}: negative quadratic coefficient at variable {j}")
        if b.coupling.shape[1] != n:
            out.append(f"block {i}: coupling has {b.coupling.shape[1]} columns, expected {n}")
        if b.n_coupling < 1:
            out.append(f"block {i}: coupling must have at least one row")
        for ci, c in enumerate(b.constraints):
            if len(c.coeffs) != n:
                out.append(f"block {i}: constraint {ci} length {len(c.coeffs)} != {n}")

    q = inst.q
    seen = np.zeros(q, dtype=int)
    for g in inst.linkage.groups:
        if len(g) == 0:
            out.append("linkage: empty group")
        for j in g:
            if j < 0 or j >= q:
                out.append("linkage: coordinate out of range")
            else:
                seen[j] += 1
    if np.any(seen > 1):
        out.append(f"linkage: coordinate {int(np.argmax(seen > 1))} in multiple groups")
    if np.any(seen == 0):
        out.append(f"linkage: coordinate {int(np.argmax(seen == 0))} unassigned")
    return out


def apply_coupling(inst, x) -> np.ndarray:
    """Global coupling image Qx as a q-vector."""
    y = np.empty(inst.q)
    for i, b in enumerate(inst.blocks):
        y[inst.block_coords(i)] = b.coupling @ np.asarray(x[i], dtype=float)
    return y


def residual(inst, x, z) -> np.ndarray:
    """r = Qx - z per global coordinate."""
    z = np.asarray(z, dtype=float)
    if z.shape != (inst.q,):
        raise ValueError(f"z has shape {z.shape}, expected ({inst.q},)")
    return apply_coupling(inst, x) - z


def group_sums(inst, y) -> np.ndarray:
    """Per-group coordinate sums of a q-vector."""
    y = np.asarray(y, dtype=float)
    sums = np.zeros(inst.linkage.n_groups)
    np.add.at(sums, inst.group_of, y)
    return sums


def project_onto_Z(inst, y) -> np.ndarray:
    """Euclidean projection onto Z: replace each group by its mean."""
    y = np.asarray(y, dtype=float)
    if y.shape != (inst.q,):
        raise ValueError(f"vector has shape {y.shape}, expected ({inst.q},)")
    means = group_sums(inst, y) / inst.group_sizes
    return means[inst.group_of]

def project_onto_Zperp(inst, v) -> np.ndarray:
    """Projection onto Z-perp: remove the group means (zero group sums)."""
    v = np.asarray(v, dtype=float)
    return v - project_onto_Z(inst, v)


def objective_value(inst, x) -> float:
    return sum(b.objective(x[i]) for i, b in enumerate(inst.blocks))


def objective_gradient(inst, x) -> list:
    return [b.gradient(x[i]) for i, b in enumerate(inst.blocks)]


def copy_point(x) -> list:
    return [np.array(xi, dtype=float) for xi in x]
