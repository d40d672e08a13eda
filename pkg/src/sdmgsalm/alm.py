"""Outer dual-ascent loop: penalized bounds, serious-step test, dual update.

Each outer iteration runs one inner-approximated Gauss-Seidel round, forms
the computable upper surrogate (phi_hat) and lower surrogate (phi_tilde,
obtained from the stationarity gap), and accepts the multiplier update only
when the serious-step ratio clears the configured threshold.  The block
work is phrased as per-block engines driven through an executor so the same
driver serves the serial entry point and the process-parallel one.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import DegenerateDenominator
from .reduction import ReducePacket, deterministic_reduce_sum
from .sdm_gs import InnerApprox, block_restriction, minimize_block_linear
from .subsolvers import DEFAULT_TOLERANCES, solve_simplex_qp

SCALAR_BUNDLE = ("lagrangian_part", "residual_sq_part", "gap_part", "phi_check_part")


# ---------------------------------------------------------------------------
# configuration / records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlmConfig:
    rho0: float = 1.0
    gamma: float = 0.1
    eps: float = 1e-6
    t_max: int = 1
    k_max: int = 100
    rho_update: str = "fixed"            # "fixed" | "kiwiel"
    rho_freeze_after: int | None = None  # stop rho updates after this many serious steps
    enforce_ssc: bool = True             # False: accept the dual update every iteration

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ValueError("rho0 must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if self.t_max < 1 or self.k_max < 1:
            raise ValueError("t_max and k_max must be at least 1")
        if self.rho_update not in ("fixed", "kiwiel"):
            raise ValueError("rho_update must be 'fixed' or 'kiwiel'")


@dataclass
class IterationRecord:
    k: int
    phi_check_best: float
    phi_hat: float
    residual_norm: float
    gamma_k: float
    serious: int
    rho: float
    wall_ms: float

    CSV_COLUMNS = (
        "k",
        "phi_check_best",
        "phi_hat",
        "residual_norm",
        "gamma_k",
        "serious",
        "rho",
        "wall_ms",
    )

    def csv_row(self):
        return (
            f"{self.k},{self.phi_check_best!r},{self.phi_hat!r},"
            f"{self.residual_norm!r},{self.gamma_k!r},{self.serious},"
            f"{self.rho!r},{self.wall_ms!r}"
        )


@dataclass
class AlmState:
    k: int
    x: list
    z: np.ndarray
    omega: np.ndarray
    phi_check_best: float
    rho: float
    vertex_set: InnerApprox
    gamma_last: float
    serious_last: bool
    n_serious: int
    status: str


@dataclass
class RunStats:
    setup_reduces: int = 0
    iteration_reduces: int = 0
    n_outer_iterations: int = 0
    broadcast_floats: int = 0   # per-iteration replicated state (group means + scalars)


@dataclass
class IterationDiagnostics:
    """Serial-run instrumentation for the invariant suite."""

    k: int
    omega_before: np.ndarray
    x: list
    z: np.ndarray
    rho: float
    gap: float
    phi_tilde: float
    phi_hat: float
    phi_check_direct: float
    residual_sq: float
    inner_objectives: list
    gamma_k: float
    serious: bool


# ---------------------------------------------------------------------------
# scalar operations
# ---------------------------------------------------------------------------


def eval_L_rho(inst, x, z, omega, rho) -> float:
    """f(x) + omega . Qx + (rho/2) |Qx - z|^2."""
    qx = model.apply_coupling(inst, x)
    r = qx - np.asarray(z, dtype=float)
    return model.objective_value(inst, x) + float(np.asarray(omega) @ qx) + 0.5 * rho * float(r @ r)


def phi_hat(inst, x, z, omega, rho) -> float:
    """Upper surrogate at (x, z): the penalized value plus the penalty again."""
    r = model.residual(inst, x, z)
    return eval_L_rho(inst, x, z, omega, rho) + 0.5 * rho * float(r @ r)


def phi_check(inst, omega, x_center, tol=DEFAULT_TOLERANCES):
    """Lower surrogate: exact minimization of the linearization at x_center
    plus multiplier term over the true (mixed-integer) blocks.

    Returns (value, minimizer).  For linear objectives the value equals the
    dual function and does not depend on the center.
    """
    omega = np.asarray(omega, dtype=float)
    grads = model.objective_gradient(inst, x_center)
    total = model.objective_value(inst, x_center) - sum(
        float(g @ xi) for g, xi in zip(grads, x_center)
    )
    minimizer = []
    for i, block in enumerate(inst.blocks):
        sl = inst.block_coords(i)
        row = grads[i] + block.coupling.T @ omega[sl]
        point, value = minimize_block_linear(block, row, tol)
        total += value
        minimizer.append(point)
    return total, minimizer


def phi_tilde_from_gamma(L_val, res_sq, gap, rho) -> float:
    """Lower-surrogate value at the shifted multiplier, recovered from the
    stationarity gap of the same state: L + (rho/2)|r|^2 - gap."""
    return L_val + 0.5 * rho * res_sq - gap


def ssc_ratio(phi_tilde, phi_hat_val, phi_check_k) -> float:
    """Serious-step ratio (phi_tilde - best) / (phi_hat - best)."""
    den = phi_hat_val - phi_check_k
    if den <= 0.0:
        raise DegenerateDenominator(f"denominator {den} is not positive")
    return (phi_tilde - phi_check_k) / den


def dual_update(omega, rho, r) -> np.ndarray:
    return np.asarray(omega, dtype=float) + rho * np.asarray(r, dtype=float)


def rho_update(rho, gamma_k) -> float:
    """Kiwiel-style penalty adjustment driven by the serious-step ratio."""
    inner = max((2.0 / rho) * (1.0 - gamma_k), 1.0 / (10.0 * rho), 1e-4)
    return 1.0 / min(inner, 10.0 / rho)


# ---------------------------------------------------------------------------
# per-block engine
# ---------------------------------------------------------------------------


class BlockEngine:
    """Owns one block's solver state: multipliers, vertex set, hull iterate.

    Every method returning a packet is a pure function of the engine state
    plus the broadcast payload, so results do not depend on which worker
    hosts the block.
    """

    def __init__(self, index, block, local_groups, omega_i, n_groups,
                 tol=DEFAULT_TOLERANCES):
        self.index = index
        self.block = block
        self.local_groups = np.asarray(local_groups, dtype=int)
        self.omega = np.asarray(omega_i, dtype=float).copy()
        self.n_groups = int(n_groups)
        self.tol = tol
        self.vertices = []
        self.lam = None
        self.x = None
        self._pending_residual = None

    # -- packet producers ------------------------------------------------

    def seed(self, _payload=None) -> ReducePacket:
        """Initial vertex: exact block minimizer of the zero-centered
        linearization at the starting multiplier."""
        row = self.block.cost_linear + self.block.coupling.T @ self.omega
        point, _ = minimize_block_linear(self.block, row, self.tol)
        self.vertices = [point]
        self.lam = np.array([1.0])
        self.x = point.copy()
        return self._coupling_packet()

    def x_update(self, payload) -> ReducePacket:
        z_groups, rho = payload
        z_local = np.asarray(z_groups, dtype=float)[self.local_groups]
        prob = block_restriction(self.block, self.omega, rho, z_local, self.vertices)
        if self.lam is not None and self.lam.shape[0] == prob.n_vertices:
            prob.start_weights = self.lam
        self.lam, self.x, _ = solve_simplex_qp(prob, tolerances=self.tol)
        return self._coupling_packet()

    def finish_iteration(self, payload) -> ReducePacket:
        """Direction subproblem, vertex expansion, and the scalar bundle."""
        z_groups, rho = payload
        z_local = np.asarray(z_groups, dtype=float)[self.local_groups]
        qx = self.block.coupling @ self.x
        r_i = qx - z_local
        self._pending_residual = r_i

        grad = self.block.gradient(self.x)
        row = grad + self.block.coupling.T @ (self.omega + rho * r_i)
        point, min_value = minimize_block_linear(self.block, row, self.tol)

        lagr_part = self.block.objective(self.x) + float(self.omega @ qx)
        res_sq_part = float(r_i @ r_i)
        gap_part = float(row @ self.x) - min_value
        phi_check_part = (
            self.block.objective(self.x) - float(grad @ self.x) + min_value
        )

        self._absorb_vertex(point)
        return ReducePacket(
            self.index,
            np.array([lagr_part, res_sq_part, gap_part, phi_check_part]),
        )

    def apply_decision(self, payload):
        serious, rho = payload
        if serious:
            self.omega = self.omega + rho * self._pending_residual
        return None

    def collect(self, _payload=None):
        return (
            self.index,
            self.x.copy(),
            self.omega.copy(),
            [v.copy() for v in self.vertices],
            None if self.lam is None else self.lam.copy(),
        )

    # -- internals --------------------------------------------------------

    def _coupling_packet(self) -> ReducePacket:
        partial = np.zeros(self.n_groups)
        np.add.at(partial, self.local_groups, self.block.coupling @ self.x)
        return ReducePacket(self.index, partial)

    def _absorb_vertex(self, point):
        eps = self.tol.vertex_dedup
        for v in self.vertices:
            if np.max(np.abs(v - point)) <= eps:
                return
        self.vertices.append(point)
        self.lam = np.append(self.lam, 0.0)


def build_engines(inst, omega0, tol=DEFAULT_TOLERANCES):
    omega0 = np.asarray(omega0, dtype=float)
    return [
        BlockEngine(
            i,
            inst.blocks[i],
            inst.local_groups[i],
            omega0[inst.block_coords(i)],
            inst.linkage.n_groups,
            tol,
        )
        for i in range(inst.n_blocks)
    ]


class SerialExecutor:
    """Runs every block engine in-process, in ascending block order."""

    def __init__(self, engines):
        self.engines = engines

    def map(self, method, payload=None):
        return [getattr(e, method)(payload) for e in self.engines]

    def broadcast(self, method, payload=None):
        for e in self.engines:
            getattr(e, method)(payload)

    def collect(self):
        return [e.collect() for e in self.engines]

    def close(self):
        pass


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def drive(inst, cfg: AlmConfig, executor, diagnostics=None):
    """Shared outer loop; `diagnostics` (a list, serial executors only)
    receives one IterationDiagnostics per outer iteration."""
    m = inst.n_blocks
    sizes = inst.group_sizes
    stats = RunStats(broadcast_floats=inst.linkage.n_groups + 2)
    records = []
    peek = isinstance(executor, SerialExecutor) and diagnostics is not None

    def reduce_groups(packets):
        return deterministic_reduce_sum(packets, m) / sizes

    # setup: seed one vertex per block, giving the starting hull point
    z_groups = reduce_groups(executor.map("seed"))
    stats.setup_reduces += 1

    rho = cfg.rho0
    phi_best = None
    n_serious = 0
    status = "iteration_limit"
    gamma_k = math.nan
    serious = True

    def one_round(z_groups, rho, inner_log=None):
        for _ in range(cfg.t_max):
            packets = executor.map("x_update", (z_groups, rho))
            z_groups = reduce_groups(packets)
            stats.iteration_reduces += 1
            if inner_log is not None:
                x_now, z_now = _peek_state(executor, inst, z_groups)
                omega_now = _peek_omega(executor, inst)
                inner_log.append(eval_L_rho(inst, x_now, z_now, omega_now, rho))
        scalars = deterministic_reduce_sum(
            executor.map("finish_iteration", (z_groups, rho)), m
        )
        stats.iteration_reduces += 1
        return z_groups, scalars

    for k in range(cfg.k_max + 1):
        tic = time.perf_counter()
        inner_log = [] if peek else None
        omega_before = _peek_omega(executor, inst) if peek else None

        z_groups, scalars = one_round(z_groups, rho, inner_log)
        stats.n_outer_iterations += 1
        lagr_sum, res_sq, gap, phi_direct = (float(s) for s in scalars)
        L_val = lagr_sum + 0.5 * rho * res_sq
        phi_hat_val = L_val + 0.5 * rho * res_sq
        res_norm = math.sqrt(max(res_sq, 0.0))
        phi_tilde = phi_hat_val - gap

        if k == 0:
            # unconditional pre-loop dual update seeds the retained bound
            serious, gamma_k = True, 1.0
            executor.broadcast("apply_decision", (True, rho))
            phi_best = phi_tilde
            n_serious += 1
            rho_used = rho
        else:
            if phi_hat_val - phi_best <= cfg.eps:
                status = "converged"
                wall = (time.perf_counter() - tic) * 1e3
                records.append(
                    IterationRecord(k, phi_best, phi_hat_val, res_norm,
                                    math.nan, 0, rho, wall)
                )
                if peek:
                    diagnostics.append(_diag(k, executor, inst, omega_before,
                                             z_groups, rho, gap, phi_tilde,
                                             phi_hat_val, phi_direct, res_sq,
                                             inner_log, math.nan, False))
                break
            gamma_k = ssc_ratio(phi_tilde, phi_hat_val, phi_best)
            serious = bool(gamma_k >= cfg.gamma) or not cfg.enforce_ssc
            executor.broadcast("apply_decision", (serious, rho))
            if serious:
                phi_best = phi_tilde
                n_serious += 1
            rho_used = rho
            if cfg.rho_update == "kiwiel" and (
                cfg.rho_freeze_after is None or n_serious < cfg.rho_freeze_after
            ):
                rho = rho_update(rho, gamma_k)

        wall = (time.perf_counter() - tic) * 1e3
        records.append(
            IterationRecord(k, phi_best, phi_hat_val, res_norm,
                            gamma_k, int(serious), rho_used, wall)
        )
        if peek:
            diagnostics.append(_diag(k, executor, inst, omega_before, z_groups,
                                     rho_used, gap, phi_tilde, phi_hat_val,
                                     phi_direct, res_sq, inner_log, gamma_k,
                                     serious))

    state = _final_state(executor, inst, z_groups, phi_best, rho, gamma_k,
                         serious, n_serious, status, records)
    return state, records, stats


def _peek_omega(executor, inst):
    omega = np.empty(inst.q)
    for e in executor.engines:
        omega[inst.block_coords(e.index)] = e.omega
    return omega


def _peek_state(executor, inst, z_groups):
    x = [e.x.copy() for e in executor.engines]
    return x, np.asarray(z_groups)[inst.group_of]


def _diag(k, executor, inst, omega_before, z_groups, rho, gap, phi_tilde,
          phi_hat_val, phi_direct, res_sq, inner_log, gamma_k, serious):
    x, z = _peek_state(executor, inst, z_groups)
    return IterationDiagnostics(
        k=k,
        omega_before=omega_before,
        x=x,
        z=z,
        rho=rho,
        gap=gap,
        phi_tilde=phi_tilde,
        phi_hat=phi_hat_val,
        phi_check_direct=phi_direct,
        residual_sq=res_sq,
        inner_objectives=inner_log or [],
        gamma_k=gamma_k,
        serious=serious,
    )


def _final_state(executor, inst, z_groups, phi_best, rho, gamma_k, serious,
                 n_serious, status, records):
    collected = sorted(executor.collect(), key=lambda t: t[0])
    x = [c[1] for c in collected]
    omega = np.empty(inst.q)
    for c in collected:
        omega[inst.block_coords(c[0])] = c[2]
    vertex_set = InnerApprox(
        vertices=[c[3] for c in collected],
        weights=[c[4] for c in collected],
    )
    z = np.asarray(z_groups)[inst.group_of]
    return AlmState(
        k=records[-1].k if records else 0,
        x=x,
        z=z,
        omega=omega,
        phi_check_best=phi_best,
        rho=rho,
        vertex_set=vertex_set,
        gamma_last=gamma_k,
        serious_last=serious,
        n_serious=n_serious,
        status=status,
    )


def run_sdm_gs_alm(inst, cfg: AlmConfig, omega0=None, tol=DEFAULT_TOLERANCES,
                   diagnostics=None):
    """Serial solve; returns (final AlmState, iteration records).

    omega0 defaults to zero and is projected onto the dual-feasible subspace
    (zero group sums) before use.
    """
    violations = model.validate_instance(inst)
    if violations:
        from .errors import InstanceValidationError

        raise InstanceValidationError(violations)
    omega0 = np.zeros(inst.q) if omega0 is None else np.asarray(omega0, dtype=float)
    omega0 = model.project_onto_Zperp(inst, omega0)
    executor = SerialExecutor(build_engines(inst, omega0, tol))
    state, records, _ = drive(inst, cfg, executor, diagnostics)
    return state, records


def run_sdm_gs_alm_with_stats(inst, cfg: AlmConfig, omega0=None,
                              tol=DEFAULT_TOLERANCES, diagnostics=None):
    """Serial solve returning (state, records, reduce/broadcast stats)."""
    omega0 = np.zeros(inst.q) if omega0 is None else np.asarray(omega0, dtype=float)
    omega0 = model.project_onto_Zperp(inst, omega0)
    executor = SerialExecutor(build_engines(inst, omega0, tol))
    return drive(inst, cfg, executor, diagnostics)


# ---------------------------------------------------------------------------
# projected subgradient baseline
# ---------------------------------------------------------------------------


@dataclass
class SubgradientRecord:
    k: int
    phi: float
    phi_best: float
    residual_norm: float
    step: float

    CSV_COLUMNS = ("k", "phi", "phi_best", "residual_norm", "step")

    def csv_row(self):
        return f"{self.k},{self.phi!r},{self.phi_best!r},{self.residual_norm!r},{self.step!r}"


def _foldable_linear_row(block):
    """Linear coefficients equal to the block objective on its feasible set,
    or None when the quadratic part cannot be folded (non-binary variables)."""
    if block.is_linear:
        return block.cost_linear
    quad_vars = np.flatnonzero(block.cost_quad_diag)
    binary = (block.lb[quad_vars] == 0) & (block.ub[quad_vars] == 1) & block.integer[quad_vars]
    if not np.all(binary):
        return None
    return block.cost_linear + block.cost_quad_diag  # x^2 == x on binaries


def run_subgradient_baseline(inst, k_max=200, step0=1.0, omega0=None,
                             tol=DEFAULT_TOLERANCES):
    """Projected subgradient ascent on the dual; every logged phi value is a
    true dual-function value, hence a valid lower bound."""
    omega = np.zeros(inst.q) if omega0 is None else np.asarray(omega0, dtype=float)
    omega = model.project_onto_Zperp(inst, omega)
    rows0 = []
    for block in inst.blocks:
        row = _foldable_linear_row(block)
        if row is None:
            raise ValueError(
                "subgradient baseline supports quadratic terms on binary variables only"
            )
        rows0.append(row)

    records = []
    best = -math.inf
    for k in range(1, k_max + 1):
        phi_val = 0.0
        x = []
        for i, block in enumerate(inst.blocks):
            sl = inst.block_coords(i)
            point, value = minimize_block_linear(
                block, rows0[i] + block.coupling.T @ omega[sl], tol
            )
            phi_val += value + block.cost_constant
            x.append(point)
        r = model.project_onto_Zperp(inst, model.apply_coupling(inst, x))
        best = max(best, phi_val)
        step = step0 / math.sqrt(k)
        records.append(
            SubgradientRecord(k, phi_val, best, float(np.linalg.norm(r)), step)
        )
        omega = model.project_onto_Zperp(inst, omega + step * r)
    return records
