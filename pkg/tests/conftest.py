import numpy as np
import pytest

from sdmgsalm.model import BlockSpec, LinkageStructure, ProblemInstance

INSTANCE_DIR = __import__("pathlib").Path(__file__).resolve().parent.parent / "instances"


def make_paper_example():
    """Two linked binaries with f(x) = (x1-1/2)^2 + (x2-1/2)^2."""
    block = BlockSpec(
        cost_linear=[-1.0, -1.0],
        cost_quad_diag=[1.0, 1.0],
        lb=[0, 0],
        ub=[1, 1],
        integer=[True, True],
        coupling=np.eye(2),
        cost_constant=0.5,
    )
    return ProblemInstance("paper_example", (block,), LinkageStructure(((0, 1),)))


def make_ex2():
    """Two single-binary blocks with costs 1 and -3, copies linked."""
    return ProblemInstance(
        "ex2",
        (
            BlockSpec([1.0], [0.0], [0], [1], [True], [[1.0]]),
            BlockSpec([-3.0], [0.0], [0], [1], [True], [[1.0]]),
        ),
        LinkageStructure(((0, 1),)),
    )


def random_instance(rng, m=None, n=None, quadratic=False, with_rows=True):
    """Small random enumerable instance with every variable linked or not
    depending on a per-block coupling of the first half of the variables."""
    m = int(rng.integers(2, 5)) if m is None else m
    n = int(rng.integers(2, 5)) if n is None else n
    n_link = max(1, n // 2)
    blocks = []
    for _ in range(m):
        cost = np.round(rng.uniform(-5, 5, n), 3)
        quad = np.round(rng.uniform(0.1, 2.0, n), 3) if quadratic else np.zeros(n)
        cons = ()
        if with_rows and rng.random() < 0.7:
            coeffs = rng.integers(1, 6, n).astype(float)
            from sdmgsalm.model import LinearConstraint

            cons = (LinearConstraint(coeffs, "<=", float(np.floor(0.6 * coeffs.sum()))),)
        blocks.append(
            BlockSpec(
                cost_linear=cost,
                cost_quad_diag=quad,
                lb=np.zeros(n),
                ub=np.ones(n),
                integer=np.ones(n, dtype=bool),
                coupling=np.eye(n)[:n_link],
                constraints=cons,
                cost_constant=float(np.round(rng.uniform(-1, 1), 3)),
            )
        )
    groups = tuple(tuple(i * n_link + j for i in range(m)) for j in range(n_link))
    return ProblemInstance("random", tuple(blocks), LinkageStructure(groups))


def random_zperp(rng, inst, scale=1.0):
    from sdmgsalm.model import project_onto_Zperp

    return project_onto_Zperp(inst, rng.normal(0.0, scale, inst.q))


@pytest.fixture
def paper_example():
    return make_paper_example()


@pytest.fixture
def ex2():
    return make_ex2()
