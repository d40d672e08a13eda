import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from sdmgsalm.errors import MaxInnerIterations, NodeLimitExceeded
from sdmgsalm.subsolvers import (
    LpProblem,
    SimplexQpProblem,
    solve_lp,
    solve_milp,
    solve_simplex_qp,
)


def lp(c, rows, rels, rhs, lb, ub):
    return LpProblem(np.asarray(c, float), rows, rels, rhs, lb, ub)


class TestLp:
    def test_bound_active_optimum(self):
        sol = solve_lp(lp([-1.0], np.zeros((0, 1)), (), [], [0.0], [1.0]))
        assert sol.status == "optimal"
        assert sol.value == pytest.approx(-1.0, abs=1e-9)
        assert sol.x[0] == pytest.approx(1.0, abs=1e-9)

    def test_symmetric_tight_row(self):
        sol = solve_lp(lp([1.0, 1.0], [[1.0, 1.0]], (">=",), [1.0], [0, 0], [1, 1]))
        assert sol.status == "optimal"
        assert sol.value == pytest.approx(1.0, abs=1e-9)

    def test_infeasible(self):
        sol = solve_lp(lp([0.0], [[1.0]], (">=",), [2.0], [0.0], [1.0]))
        assert sol.status == "infeasible"

    def test_empty_bound_range(self):
        sol = solve_lp(lp([1.0], np.zeros((0, 1)), (), [], [1.0], [0.0]))
        assert sol.status == "infeasible"

    def test_fuzz_against_scipy(self):
        rng = np.random.default_rng(0)
        for _ in range(150):
            n = int(rng.integers(1, 7))
            m = int(rng.integers(0, 5))
            c = rng.uniform(-5, 5, n)
            A = rng.uniform(-3, 3, (m, n))
            rels = tuple(("<=", "=", ">=")[rng.integers(0, 3)] for _ in range(m))
            lb = rng.uniform(-2, 0, n)
            ub = lb + rng.uniform(0.1, 3, n)
            rhs = A @ ((lb + ub) / 2) + rng.uniform(-2, 2, m)
            mine = solve_lp(lp(c, A, rels, rhs, lb, ub))

            A_ub, b_ub, A_eq, b_eq = [], [], [], []
            for i, r in enumerate(rels):
                if r == "<=":
                    A_ub.append(A[i]); b_ub.append(rhs[i])
                elif r == ">=":
                    A_ub.append(-A[i]); b_ub.append(-rhs[i])
                else:
                    A_eq.append(A[i]); b_eq.append(rhs[i])
            ref = linprog(
                c,
                A_ub=np.array(A_ub) if A_ub else None,
                b_ub=np.array(b_ub) if b_ub else None,
                A_eq=np.array(A_eq) if A_eq else None,
                b_eq=np.array(b_eq) if b_eq else None,
                bounds=list(zip(lb, ub)),
                method="highs",
            )
            if ref.status == 2:
                assert mine.status == "infeasible"
            else:
                assert mine.status == "optimal"
                assert mine.value == pytest.approx(ref.fun, abs=1e-7, rel=1e-7)

    def test_duals_are_valid_kkt_multipliers(self):
        rng = np.random.default_rng(1)
        checked = 0
        for _ in range(80):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(1, 4))
            c = rng.uniform(-5, 5, n)
            A = rng.uniform(-3, 3, (m, n))
            rels = tuple(("<=", "=", ">=")[rng.integers(0, 3)] for _ in range(m))
            lb = rng.uniform(-2, 0, n)
            ub = lb + rng.uniform(0.1, 3, n)
            rhs = A @ ((lb + ub) / 2) + rng.uniform(-0.5, 2, m)
            sol = solve_lp(lp(c, A, rels, rhs, lb, ub))
            if sol.status != "optimal":
                continue
            checked += 1
            x, y = sol.x, sol.duals
            red = c - A.T @ y
            for j in range(n):
                at_lb = x[j] < lb[j] + 1e-7
                at_ub = x[j] > ub[j] - 1e-7
                if at_lb and not at_ub:
                    assert red[j] >= -1e-6
                elif at_ub and not at_lb:
                    assert red[j] <= 1e-6
                elif not at_lb and not at_ub:
                    assert abs(red[j]) <= 1e-6
            for i, r in enumerate(rels):
                slack = A[i] @ x - rhs[i]
                if r == "<=":
                    assert y[i] <= 1e-8
                    if slack < -1e-7:
                        assert abs(y[i]) <= 1e-8
                if r == ">=":
                    assert y[i] >= -1e-8
                    if slack > 1e-7:
                        assert abs(y[i]) <= 1e-8
        assert checked > 30


def enumerate_min(c, A, rels, rhs, ub):
    best, bestx = np.inf, None
    for pt in itertools.product(*[range(int(u) + 1) for u in ub]):
        x = np.array(pt, dtype=float)
        ok = True
        for i, r in enumerate(rels):
            s = A[i] @ x - rhs[i]
            if (r == "<=" and s > 1e-9) or (r == ">=" and s < -1e-9) or (r == "=" and abs(s) > 1e-9):
                ok = False
                break
        if ok and c @ x < best:
            best, bestx = float(c @ x), x
    return best, bestx


class TestMilp:
    def test_single_binary(self):
        sol = solve_milp(lp([-1.0], np.zeros((0, 1)), (), [], [0.0], [1.0]), [True])
        assert sol.status == "optimal"
        assert sol.point[0] == 1.0
        assert sol.objective == pytest.approx(-1.0)

    def test_two_binaries_no_rows(self):
        # frozen from exhaustive enumeration over the 4 points
        sol = solve_milp(lp([1.0, -3.0], np.zeros((0, 2)), (), [], [0, 0], [1, 1]),
                         [True, True])
        assert np.allclose(sol.point, [0.0, 1.0])
        assert sol.objective == pytest.approx(-3.0)

    def test_tie_breaks_to_low_index_point(self):
        # enumeration gives two optima (1,0) and (0,1); deterministic pivoting
        # must settle on (1,0)
        sol = solve_milp(lp([-1.0, -1.0], [[1.0, 1.0]], ("<=",), [1.0], [0, 0], [1, 1]),
                         [True, True])
        assert sol.objective == pytest.approx(-1.0)
        assert np.allclose(sol.point, [1.0, 0.0])

    def test_infeasible(self):
        sol = solve_milp(lp([0.0], [[1.0]], (">=",), [2.0], [0.0], [1.0]), [True])
        assert sol.status == "infeasible"

    def test_node_limit(self):
        rng = np.random.default_rng(3)
        n = 10
        c = rng.uniform(-5, 5, n)
        A = rng.uniform(0.5, 3, (1, n))
        prob = lp(c, A, ("<=",), [A.sum() * 0.4], np.zeros(n), np.ones(n))
        with pytest.raises(NodeLimitExceeded):
            solve_milp(prob, np.ones(n, dtype=bool), node_limit=1)

    def test_deterministic_repeat(self):
        rng = np.random.default_rng(4)
        n = 6
        c = rng.uniform(-5, 5, n)
        A = rng.uniform(-2, 3, (2, n))
        prob = lp(c, A, ("<=", "<="), A @ np.full(n, 0.5), np.zeros(n), np.ones(n))
        first = solve_milp(prob, np.ones(n, dtype=bool))
        for _ in range(3):
            again = solve_milp(prob, np.ones(n, dtype=bool))
            assert np.array_equal(first.point, again.point)
            assert first.objective == again.objective

    def test_oracle_equivalence_and_relaxation_bound(self):
        rng = np.random.default_rng(5)
        for _ in range(120):
            n = int(rng.integers(1, 7))
            m = int(rng.integers(0, 4))
            c = rng.uniform(-5, 5, n)
            A = rng.uniform(-3, 3, (m, n))
            rels = tuple(("<=", ">=", "=")[rng.integers(0, 3)] for _ in range(m))
            ub = rng.integers(1, 4, n).astype(float)
            x_ref = np.array([rng.integers(0, int(u) + 1) for u in ub], dtype=float)
            rhs = A @ x_ref + np.where([r == "=" for r in rels], 0.0, rng.uniform(-1, 1, m))
            prob = lp(c, A, rels, rhs, np.zeros(n), ub)
            got = solve_milp(prob, np.ones(n, dtype=bool))
            best, _ = enumerate_min(c, A, rels, rhs, ub)
            if best == np.inf:
                assert got.status == "infeasible"
            else:
                assert got.status == "optimal"
                assert got.objective == pytest.approx(best, abs=1e-9)
                relaxed = solve_lp(prob)
                assert relaxed.value <= got.objective + 1e-9


class TestSimplexQp:
    def test_singleton_hull(self):
        lam, x, _ = solve_simplex_qp(
            SimplexQpProblem(np.array([[2.0, 5.0]]), np.zeros((1, 1)), np.zeros(1))
        )
        assert np.allclose(lam, [1.0])
        assert np.allclose(x, [2.0, 5.0])

    def test_interior_optimum(self):
        # vertices {0,1} subset R, objective (x - 0.3)^2 with x = lam_2
        prob = SimplexQpProblem(
            np.array([[0.0], [1.0]]),
            np.array([[0.0, 0.0], [0.0, 1.0]]),
            np.array([0.0, -0.6]),
            0.09,
        )
        lam, x, value = solve_simplex_qp(prob)
        assert np.allclose(lam, [0.7, 0.3], atol=1e-9)
        assert x[0] == pytest.approx(0.3, abs=1e-9)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_boundary_optimum(self):
        # objective (x - 2)^2: unconstrained minimum outside the hull
        prob = SimplexQpProblem(
            np.array([[0.0], [1.0]]),
            np.array([[0.0, 0.0], [0.0, 1.0]]),
            np.array([0.0, -4.0]),
            4.0,
        )
        lam, x, value = solve_simplex_qp(prob)
        assert np.allclose(lam, [0.0, 1.0])
        assert x[0] == pytest.approx(1.0)
        assert value == pytest.approx(1.0)

    def test_linear_degenerate_picks_min_vertex(self):
        prob = SimplexQpProblem(
            np.array([[0.0], [1.0], [2.0]]), np.zeros((3, 3)), np.array([3.0, -1.0, 2.0])
        )
        lam, x, value = solve_simplex_qp(prob)
        assert np.allclose(lam, [0.0, 1.0, 0.0])
        assert value == pytest.approx(-1.0)

    def test_objective_below_every_vertex_and_simplex_feasible(self):
        rng = np.random.default_rng(7)
        for _ in range(60):
            k = int(rng.integers(1, 10))
            M = rng.uniform(-1, 1, (k, k))
            quad = M @ M.T * rng.uniform(0, 2)
            linear = rng.uniform(-3, 3, k)
            prob = SimplexQpProblem(np.eye(k), quad, linear)
            lam, _, value = solve_simplex_qp(prob)
            assert np.all(lam >= -1e-12)
            assert abs(lam.sum() - 1.0) <= 1e-12
            for j in range(k):
                e = np.zeros(k)
                e[j] = 1.0
                assert value <= prob.objective(e) + 1e-9

    def test_iteration_cap_raises(self):
        prob = SimplexQpProblem(
            np.array([[0.0], [1.0]]),
            np.array([[0.0, 0.0], [0.0, 1.0]]),
            np.array([0.0, -0.61]),
        )
        with pytest.raises(MaxInnerIterations):
            solve_simplex_qp(prob, max_iter=0)

    def test_warm_start_respected(self):
        prob = SimplexQpProblem(
            np.array([[0.0], [1.0]]),
            np.array([[0.0, 0.0], [0.0, 1.0]]),
            np.array([0.0, -0.6]),
            start_weights=np.array([0.7, 0.3]),
        )
        lam, x, _ = solve_simplex_qp(prob)
        assert x[0] == pytest.approx(0.3, abs=1e-9)
