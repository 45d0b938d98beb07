import numpy as np
import pytest

from lcn_ot.errors import LcnOtError, UndefinedMetricError
from lcn_ot.metrics import (CSV_FIELDS, clustered_error_study, compare_plans, kernel_error_study, kl_divergence,
                            runtime_sweep, sinkhorn_error_study, top_entries, uniform_error_study)
from lcn_ot.runner import RunConfig, run


def test_identical_plans(rng):
    P = rng.random((20, 30))
    cmp = compare_plans(P, P, 1.5, 1.5)
    assert cmp.pcc == pytest.approx(1.0) and cmp.iou == 1.0 and cmp.rel_err_d == 0.0


def test_disjoint_top_sets():
    A = np.zeros((10, 10))
    B = np.zeros((10, 10))
    A[0, 0] = 1.0
    B[9, 9] = 1.0
    assert compare_plans(A, B, 1.0, 2.0).iou == 0.0


def test_constant_plan_is_undefined():
    with pytest.raises(UndefinedMetricError):
        compare_plans(np.ones((3, 3)), np.eye(3), 1.0, 1.0)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        compare_plans(np.eye(3), np.eye(4), 1.0, 1.0)


def test_top_entry_ties_prefer_row_then_col():
    P = np.ones((40, 50))  # 2000 entries -> top 2
    assert top_entries(P).tolist() == [0, 1]
    P[3, 7] = 2.0
    assert top_entries(P).tolist() == [3 * 50 + 7, 0]


def test_swapping_arguments(rng):
    A, B = rng.random((30, 40)), rng.random((30, 40))
    ab, ba = compare_plans(A, B, 2.0, 3.0), compare_plans(B, A, 3.0, 2.0)
    assert ab.pcc == pytest.approx(ba.pcc) and ab.iou == ba.iou
    assert ab.rel_err_d == pytest.approx(0.5) and ba.rel_err_d == pytest.approx(1 / 3)


def test_kl_divergence():
    P = np.array([[0.5, 0.5]])
    assert kl_divergence(P, P) == 0.0
    assert kl_divergence(P, np.array([[1.0, 0.0]])) == np.inf


def test_plan_quality_ordering_at_small_scale():
    cfg = RunConfig(problem={"generator": "uniform-ball", "n": 100, "d": 16}, variants=["sparse", "nystrom"],
                    lam=0.05, budget={"total": 40}, seeds=[0, 1, 2], strict=True)
    recs = run(cfg)
    pcc = {v: np.mean([r.pcc for r in recs if r.variant == v]) for v in ("sparse", "nystrom")}
    assert pcc["sparse"] > pcc["nystrom"]


def test_clustered_study_matches_closed_forms():
    rep = kernel_error_study("clustered")
    assert rep.ok, rep.flags
    assert rep.max_err_sparse == pytest.approx(np.exp(-9), rel=0.1)
    assert rep.max_err_lcn < 2 * np.exp(-9)


def test_clustered_study_point_clusters_degenerate():
    rep = clustered_error_study(r=1e-9)
    assert rep.measured["nystrom_intra"] < 1e-6


def test_clustered_study_requires_separation():
    with pytest.raises(LcnOtError):
        clustered_error_study(D=1.0, r=0.5)


def test_uniform_manifold_lcn_below_nystrom_on_twenty_seeds():
    for seed in range(20):
        rep = uniform_error_study(n=300, seed=seed)
        assert rep.flags["lcn_max_below_nystrom"], seed
        assert rep.flags["first_neighbor_error_dominates"], seed


def test_unknown_scenario():
    with pytest.raises(ValueError):
        kernel_error_study("spiral")


def test_sinkhorn_error_shrinks_with_pattern():
    rep = sinkhorn_error_study()
    assert rep.ok, rep.flags
    steps = rep.measured["steps"]
    assert steps[-1]["abs_dist_err"] < steps[0]["abs_dist_err"]


def test_runtime_sweep_schema():
    rows = runtime_sweep([50, 100], variants=("full", "lcn"), budget=10, iters=3)
    assert len(rows) == 4 and all(list(r) == CSV_FIELDS for r in rows)
    assert all(r["iters"] == 3 for r in rows)
    with pytest.raises(ValueError):
        runtime_sweep([100, 50])


@pytest.mark.slow
def test_lcn_time_linear_in_budget():
    rows = runtime_sweep([4000], variants=("lcn",), budgets=[20, 40], iters=10, repeats=3)
    ratio = rows[1]["ms_ot"] / rows[0]["ms_ot"]
    assert ratio <= 2.5
