import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from lcn_ot.errors import DimensionError
from lcn_ot.geometry import (CostFunction, DenseCost, Marginals, PointSet, build_cost, build_kernel,
                             paired_cost, pairwise_cost)

coords = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def test_self_distance_is_zero():
    P = PointSet([[0.0, 0.0]])
    assert build_cost(P, P).C.tolist() == [[0.0]]


def test_three_four_five():
    C = build_cost(PointSet([[0.0, 0.0]]), PointSet([[3.0, 4.0]]))
    assert C.C[0, 0] == pytest.approx(5.0)


def test_cosine_orthogonal_unit_vectors():
    C = build_cost(PointSet([[1.0, 0.0]]), PointSet([[0.0, 1.0]]), "cosine-derived")
    assert C.C[0, 0] == pytest.approx(1.0)


@pytest.mark.parametrize("c,lam,expected", [(0.0, 1.0, 1.0), (5.0, 5.0, math.exp(-1)), (np.inf, 2.0, 0.0)])
def test_kernel_scalar_cases(c, lam, expected):
    K = build_kernel(DenseCost(np.array([[c]]), lam)).dense()
    assert K[0, 0] == pytest.approx(expected, abs=1e-12)


def test_cost_aliases():
    assert CostFunction.parse("l2") is CostFunction.EUCLIDEAN
    assert CostFunction.parse("dot") is CostFunction.NEGATIVE_DOT
    assert CostFunction.parse("cosine") is CostFunction.COSINE
    with pytest.raises(ValueError):
        CostFunction.parse("manhattan")


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        build_cost(PointSet(np.zeros((2, 2))), PointSet(np.zeros((2, 3))))


def test_cosine_rejects_zero_vector():
    with pytest.raises(ValueError):
        pairwise_cost(np.zeros((1, 2)), np.ones((1, 2)), "cosine-derived")


def test_lambda_must_be_positive():
    with pytest.raises(ValueError):
        DenseCost(np.zeros((1, 1)), 0.0)


def test_pointset_rejects_nonfinite_and_is_readonly():
    with pytest.raises(ValueError):
        PointSet([[np.nan, 0.0]])
    P = PointSet(np.ones((3, 2)))
    with pytest.raises(ValueError):
        P.points[0, 0] = 2.0


def test_marginals_validation():
    Marginals([0.5, 0.5], [1.0])
    with pytest.raises(ValueError):
        Marginals([0.5, 0.6], [1.0])
    with pytest.raises(ValueError):
        Marginals([1.0, 0.0], [1.0])
    m = Marginals.uniform(4, 2)
    assert m.shape == (4, 2) and m.p.sum() == pytest.approx(1.0)


@pytest.mark.parametrize("cost", list(CostFunction))
def test_paired_matches_pairwise(cost, rng):
    X, Y = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
    full = pairwise_cost(X, Y, cost)
    assert np.allclose(paired_cost(X, Y, cost), np.diag(full), atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (3, 3), elements=coords))
def test_euclidean_is_a_metric(X):
    C = pairwise_cost(X, X)
    assert np.all(C >= 0)
    assert np.allclose(C, C.T)
    assert np.allclose(np.diag(C), 0)
    assert C[0, 2] <= C[0, 1] + C[1, 2] + 1e-9


@settings(max_examples=50, deadline=None)
@given(arrays(float, (4, 2), elements=coords), st.floats(0.05, 5))
def test_kernel_monotone_in_cost(X, lam):
    C = pairwise_cost(X[:2], X[2:])
    K = build_kernel(DenseCost(C, lam)).dense()
    c, k = C.ravel(), K.ravel()
    for a in range(4):
        for b in range(4):
            if c[a] < c[b]:
                assert k[a] >= k[b]


@settings(max_examples=50, deadline=None)
@given(arrays(float, (4, 3), elements=coords))
def test_cosine_range(X):
    X = X[np.linalg.norm(X, axis=1) > 1e-6]
    if len(X) == 0:
        return
    C = pairwise_cost(X, X, "cosine-derived")
    assert np.all(C >= 0) and np.all(C <= math.sqrt(2) + 1e-12)
