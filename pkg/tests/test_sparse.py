import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import pair_support_brute

from lcn_ot.geometry import PointSet, build_cost, build_kernel
from lcn_ot.lsh import NeighborPairs
from lcn_ot.nystrom import LandmarkSet, NystromFactors, build_factors
from lcn_ot.sparse import (LcnCorrection, SparseKernel, Support, build_correction, build_sparse, has_support,
                           segment_logsumexp, sparse_matvec)


def _random_pattern(rng, n, m, density=0.3):
    mask = rng.random((n, m)) < density
    return mask, NeighborPairs.from_arrays(*np.nonzero(mask), (n, m))


def test_full_pattern_matches_dense(rng):
    P, Q = PointSet(rng.random((6, 2))), PointSet(rng.random((5, 2)))
    S = build_sparse(P, Q, NeighborPairs.full(6, 5), lam=0.3)
    assert np.allclose(S.dense(), build_kernel(build_cost(P, Q, lam=0.3)).dense(), atol=1e-15)


def test_empty_pattern_is_zero(rng):
    S = build_sparse(PointSet(rng.random((3, 2))), PointSet(rng.random((3, 2))), NeighborPairs.empty(3, 3))
    assert not S.dense().any()
    assert np.all(np.isneginf(S.log_matvec(np.zeros(3))))


def test_diagonal_self_pattern():
    X = PointSet(np.arange(6.0).reshape(3, 2))
    S = build_sparse(X, X, NeighborPairs.from_pairs([(0, 0), (1, 1), (2, 2)], (3, 3)))
    assert np.exp(S.logvals).tolist() == [1.0, 1.0, 1.0]


def test_shape_mismatch():
    with pytest.raises(IndexError):
        build_sparse(PointSet(np.zeros((2, 1))), PointSet(np.zeros((2, 1))), NeighborPairs.full(3, 2))


def test_identity_matvec_and_empty_row():
    S = SparseKernel(NeighborPairs.from_pairs([(0, 0), (1, 1)], (3, 2)), np.zeros(2))
    assert np.allclose(sparse_matvec(S, np.array([2.0, 3.0])), [2.0, 3.0, 0.0], rtol=1e-15, atol=0)


def test_matvec_against_dense(rng):
    mask, pairs = _random_pattern(rng, 8, 8)
    S = SparseKernel(pairs, rng.standard_normal(len(pairs)))
    K = S.dense()
    t, s = rng.random(8), rng.random(8)
    assert np.allclose(sparse_matvec(S, t), K @ t, rtol=1e-12, atol=0)
    assert np.allclose(sparse_matvec(S, s, transpose=True), K.T @ s, rtol=1e-12, atol=0)
    # signed input goes through the linear path
    u = rng.standard_normal(8)
    assert np.allclose(sparse_matvec(S, u), K @ u, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_matvec_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    _, pairs = _random_pattern(rng, 7, 6)
    S = SparseKernel(pairs, rng.standard_normal(len(pairs)))
    t1, t2 = rng.random(6), rng.random(6)
    lhs = sparse_matvec(S, a * t1 + b * t2)
    rhs = a * sparse_matvec(S, t1) + b * sparse_matvec(S, t2)
    assert np.allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


def test_segment_logsumexp(rng):
    vals = rng.standard_normal(10) * 50
    indptr = np.array([0, 3, 3, 10])
    out = segment_logsumexp(vals, indptr)
    assert np.isneginf(out[1])
    assert out[0] == pytest.approx(np.log(np.exp(vals[:3]).sum()))
    big = np.array([1000.0, 1000.0])
    assert segment_logsumexp(big, np.array([0, 2]))[0] == pytest.approx(1000 + np.log(2))


def test_correction_vanishes_with_all_landmarks(rng):
    P, Q = PointSet(rng.random((10, 2))), PointSet(rng.random((10, 2)))
    _, pairs = _random_pattern(rng, 10, 10)
    F = build_factors(P, Q, LandmarkSet(np.vstack([P.points, Q.points])), lam=0.5)
    assert build_correction(build_sparse(P, Q, pairs, lam=0.5), F).max_abs <= 1e-8


def test_correction_without_landmarks_is_sparse_kernel(rng):
    P, Q = PointSet(rng.random((6, 2))), PointSet(rng.random((6, 2)))
    _, pairs = _random_pattern(rng, 6, 6)
    S = build_sparse(P, Q, pairs, lam=0.5)
    corr = build_correction(S, NystromFactors.zero(6, 6))
    assert np.array_equal(corr.delta, np.exp(S.logvals))


def test_correction_exact_on_pattern(rng):
    P, Q, lam = PointSet(rng.random((10, 2))), PointSet(rng.random((10, 2))), 0.4
    mask, pairs = _random_pattern(rng, 10, 10)
    F = build_factors(P, Q, LandmarkSet(rng.random((3, 2))), lam=lam)
    K_lcn = F.dense() + build_correction(build_sparse(P, Q, pairs, lam=lam), F).dense()
    K = build_kernel(build_cost(P, Q, lam=lam)).dense()
    assert np.abs(K_lcn - K)[mask].max() <= 1e-12
    assert np.array_equal(K_lcn[~mask], F.dense()[~mask])


def test_correction_matvec(rng):
    _, pairs = _random_pattern(rng, 5, 7)
    corr = LcnCorrection(pairs, rng.standard_normal(len(pairs)))
    t, s = rng.random(7), rng.random(5)
    assert np.allclose(corr.matvec(t), corr.dense() @ t)
    assert np.allclose(corr.rmatvec(s), corr.dense().T @ s)


@pytest.mark.parametrize("pairs,shape,expected", [
    ([(0, 0), (1, 1), (2, 2)], (3, 3), Support.TOTAL),
    ([(0, 0), (0, 1)], (2, 2), Support.NONE),
    ([(0, 0), (0, 1), (1, 1), (2, 2)], (3, 3), Support.SUPPORT),
])
def test_support_cases(pairs, shape, expected):
    assert has_support(NeighborPairs.from_pairs(pairs, shape)) is expected


def test_support_brute_force_up_to_seven(rng):
    for _ in range(150):
        n = int(rng.integers(1, 8))
        m = int(rng.integers(1, 8))
        mask, pairs = _random_pattern(rng, n, m, rng.uniform(0.1, 0.8))
        sup, tot = pair_support_brute(mask)
        exp = Support.TOTAL if tot else Support.SUPPORT if sup else Support.NONE
        assert has_support(pairs) is exp


def test_support_skips_total_check_when_large():
    n = 100
    pairs = NeighborPairs.from_arrays(np.r_[np.arange(n), 0], np.r_[np.arange(n), 1], (n, n))
    assert has_support(pairs) is Support.SUPPORT
    assert has_support(pairs, check_total=False) is Support.SUPPORT


def test_kernel_csv(tmp_path, rng):
    _, pairs = _random_pattern(rng, 4, 4, 0.5)
    S = SparseKernel(pairs, np.zeros(len(pairs)))
    S.to_csv(tmp_path / "k.csv")
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "i,j,logK" and len(lines) == len(pairs) + 1
