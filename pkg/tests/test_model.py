import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdmgsalm.model import (
    BlockSpec,
    LinkageStructure,
    ProblemInstance,
    apply_coupling,
    group_sums,
    project_onto_Z,
    project_onto_Zperp,
    residual,
    validate_instance,
)

from conftest import make_ex2, make_paper_example, random_instance


def two_block_instance():
    return make_ex2()


class TestValidate:
    def test_paper_example_valid(self, paper_example):
        assert validate_instance(paper_example) == []

    def test_unbounded_variable(self):
        block = BlockSpec([1.0], [0.0], [0.0], [np.inf], [False], [[1.0]])
        inst = ProblemInstance("bad", (block,), LinkageStructure(((0,),)))
        assert validate_instance(inst) == ["block 0: unbounded variable 0"]

    def test_group_out_of_range(self, ex2):
        inst = ProblemInstance("bad", ex2.blocks, LinkageStructure(((0, 2),)))
        violations = validate_instance(inst)
        assert "linkage: coordinate out of range" in violations

    def test_unassigned_coordinate(self, ex2):
        inst = ProblemInstance("bad", ex2.blocks, LinkageStructure(((0,),)))
        assert any("unassigned" in v for v in validate_instance(inst))

    def test_duplicate_coordinate(self, ex2):
        inst = ProblemInstance("bad", ex2.blocks, LinkageStructure(((0, 1), (1,))))
        assert any("multiple groups" in v for v in validate_instance(inst))

    def test_negative_quadratic(self):
        block = BlockSpec([0.0], [-1.0], [0.0], [1.0], [False], [[1.0]])
        inst = ProblemInstance("bad", (block,), LinkageStructure(((0,),)))
        assert any("negative quadratic" in v for v in validate_instance(inst))


class TestResidual:
    def test_feasible_point_zero(self, ex2):
        x = [np.array([1.0]), np.array([1.0])]
        z = np.array([1.0, 1.0])
        assert np.allclose(residual(ex2, x, z), 0.0)

    def test_paper_values(self, paper_example):
        r = residual(paper_example, [np.array([1.0, 1.0])], np.array([0.5, 0.5]))
        assert np.allclose(r, [0.5, 0.5])

    def test_two_blocks(self, ex2):
        r = residual(ex2, [np.array([0.0]), np.array([1.0])], np.array([0.5, 0.5]))
        assert np.allclose(r, [-0.5, 0.5])

    def test_dimension_mismatch(self, ex2):
        with pytest.raises(ValueError):
            residual(ex2, [np.array([0.0]), np.array([1.0])], np.zeros(3))


class TestProjection:
    def test_mean_projection(self, ex2):
        assert np.allclose(project_onto_Z(ex2, [0.2, 0.8]), [0.5, 0.5])

    def test_idempotent_on_Z(self, ex2):
        z = np.array([0.7, 0.7])
        assert np.array_equal(project_onto_Z(ex2, z), z)

    def test_groupwise_mean(self):
        blocks = (
            BlockSpec([0.0], [0.0], [0], [1], [True], [[1.0], [2.0]]),
            BlockSpec([0.0], [0.0], [0], [1], [True], [[1.0]]),
        )
        inst = ProblemInstance("g", blocks, LinkageStructure(((0, 1), (2,))))
        assert np.allclose(project_onto_Z(inst, [1.0, 2.0, 3.0]), [1.5, 1.5, 3.0])

    def test_zperp_zero(self, ex2):
        assert np.allclose(project_onto_Zperp(ex2, np.zeros(2)), 0.0)

    def test_zperp_mean_removal(self, ex2):
        assert np.allclose(project_onto_Zperp(ex2, [1.0, 0.0]), [0.5, -0.5])

    @given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=2))
    def test_orthogonal_decomposition(self, vals):
        inst = make_ex2()
        v = np.array(vals)
        total = project_onto_Z(inst, v) + project_onto_Zperp(inst, v)
        assert np.allclose(total, v, atol=1e-9 * (1 + np.max(np.abs(v))))

    @settings(max_examples=40)
    @given(st.integers(0, 10_000))
    def test_projection_properties(self, seed):
        rng = np.random.default_rng(seed)
        inst = random_instance(rng)
        y = rng.normal(0, 3, inst.q)
        p = project_onto_Z(inst, y)
        # constant within groups
        for g in inst.linkage.groups:
            assert np.ptp(p[list(g)]) <= 1e-12
        # idempotent and nonexpansive
        assert np.allclose(project_onto_Z(inst, p), p, atol=1e-12)
        assert np.linalg.norm(p) <= np.linalg.norm(y) + 1e-12
        # residual orthogonal to Z: zero group sums
        sums = group_sums(inst, y - p)
        assert np.max(np.abs(sums)) <= 1e-9


def test_residual_group_sums_zero_after_projection():
    rng = np.random.default_rng(5)
    for _ in range(25):
        inst = random_instance(rng)
        x = [rng.integers(0, 2, b.n_vars).astype(float) for b in inst.blocks]
        z = project_onto_Z(inst, apply_coupling(inst, x))
        sums = group_sums(inst, residual(inst, x, z))
        assert np.max(np.abs(sums)) <= 1e-9


def test_dual_update_stays_dual_feasible():
    from sdmgsalm.alm import dual_update

    rng = np.random.default_rng(6)
    for _ in range(25):
        inst = random_instance(rng)
        omega = project_onto_Zperp(inst, rng.normal(0, 2, inst.q))
        x = [rng.integers(0, 2, b.n_vars).astype(float) for b in inst.blocks]
        z = project_onto_Z(inst, apply_coupling(inst, x))
        omega2 = dual_update(omega, rng.uniform(0.1, 10), residual(inst, x, z))
        assert np.max(np.abs(group_sums(inst, omega2))) <= 1e-9
