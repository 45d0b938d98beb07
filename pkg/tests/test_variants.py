import numpy as np
import pytest

from lcn_ot.geometry import PointSet
from lcn_ot.lsh import LshScheme
from lcn_ot.operators import BpOperator, DenseOperator, LcnOperator, NystromOperator, SparseOperator
from lcn_ot.variants import Budget, BuildOptions, Variant, build_operator, build_pattern, timed_build


def test_budget_split():
    assert Budget.split("lcn", 40) == Budget(20, 20)
    assert Budget.split("lcn", 41) == Budget(21, 20)
    assert Budget.split("sparse", 40) == Budget(40, 0)
    assert Budget.split("nystrom", 40) == Budget(0, 40)
    assert Budget.split("full", 40).total == 0


@pytest.mark.parametrize("variant,cls", [("full", DenseOperator), ("sparse", SparseOperator),
                                         ("nystrom", NystromOperator), ("lcn", LcnOperator)])
def test_build_each_variant(variant, cls, rng):
    P, Q = PointSet(rng.random((30, 3))), PointSet(rng.random((25, 3)))
    op, ms = timed_build(variant, P, Q, 0.5, Budget.split(variant, 10))
    assert type(op) is cls and op.shape == (30, 25) and ms >= 0


@pytest.mark.parametrize("cost", ["negative-dot", "cosine-derived"])
def test_angular_costs_use_cross_polytope(cost, rng):
    P, Q = PointSet(rng.standard_normal((30, 4))), PointSet(rng.standard_normal((30, 4)))
    op = build_operator("lcn", P, Q, 1.0, Budget(5, 5), BuildOptions(cost=cost))
    assert op.shape == (30, 30)


def test_bp_option(rng):
    P, Q = PointSet(rng.random((5, 2))), PointSet(rng.random((4, 2)))
    op = build_operator("full", P, Q, 0.5, opts=BuildOptions(bp=True, deletion_cost=(1.0, 2.0)))
    assert isinstance(op, BpOperator) and op.shape == (9, 9)
    assert np.allclose(op.del_p, np.exp(-2.0)) and np.allclose(op.del_q, np.exp(-4.0))


def test_missing_budget_raises(rng):
    P = PointSet(rng.random((5, 2)))
    for v in ("sparse", "nystrom", "lcn"):
        with pytest.raises(ValueError):
            build_operator(v, P, P, 1.0, Budget())


def test_large_neighbor_budget_gives_full_pattern(rng):
    P, Q = PointSet(rng.random((6, 2))), PointSet(rng.random((8, 2)))
    assert len(build_pattern(P, Q, 8, BuildOptions(), 0)) == 48


def test_hierarchical_scheme(rng):
    P, Q = PointSet(rng.random((40, 2))), PointSet(rng.random((40, 2)))
    op = build_operator(Variant.SPARSE, P, Q, 0.5, Budget(5, 0), BuildOptions(lsh_scheme=LshScheme.HIERARCHICAL_KMEANS))
    assert op.kernel.nnz > 0
