"""Plan-approximation metrics, kernel-error studies and runtime sweeps."""
from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial.distance import cdist
from scipy.special import gammainc

from .errors import LcnOtError, UndefinedMetricError
from .generators import extremal_clusters, uniform_ball, uniform_sphere
from .geometry import CostFunction, Marginals, PointSet, build_cost, build_kernel
from .lsh import LshConfig, LshScheme, NeighborPairs, hash_kmeans, neighbor_pairs
from .nystrom import LandmarkSet, build_factors, select_landmarks
from .operators import DenseOperator, LcnOperator, SparseOperator
from .sinkhorn import iteration_bound, sinkhorn
from .sparse import Support, build_correction, build_sparse, has_support
from .variants import Budget, BuildOptions, Variant, timed_build

CSV_FIELDS = ["variant", "n", "m", "lambda", "budget", "rel_err_d", "pcc", "iou", "iters", "ms_kernel", "ms_ot"]
TOP_FRACTION = 0.001


@dataclass(frozen=True)
class PlanComparison:
    rel_err_d: float
    pcc: float
    iou: float


def _dense(plan) -> np.ndarray:
    return plan.dense() if hasattr(plan, "dense") else np.asarray(plan, dtype=np.float64)


def top_entries(P: np.ndarray, fraction: float = TOP_FRACTION) -> np.ndarray:
    """Flat indices of the ``ceil(fraction * size)`` largest entries.

    Ties go to the smaller row, then the smaller column.
    """
    flat = P.ravel()
    k = max(1, math.ceil(fraction * flat.size))
    order = np.lexsort((np.arange(flat.size), -flat))
    return order[:k]


def compare_plans(P_ref, P_approx, d_ref: float, d_approx: float, fraction: float = TOP_FRACTION) -> PlanComparison:
    A, B = _dense(P_ref), _dense(P_approx)
    if A.shape != B.shape:
        raise ValueError(f"plan shapes differ: {A.shape} vs {B.shape}")
    a, b = A.ravel(), B.ravel()
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise UndefinedMetricError("Pearson correlation undefined for a constant plan")
    pcc = float(np.corrcoef(a, b)[0, 1])
    ta, tb = set(top_entries(A, fraction).tolist()), set(top_entries(B, fraction).tolist())
    iou = len(ta & tb) / len(ta | tb)
    rel = abs(d_approx - d_ref) / abs(d_ref) if d_ref != 0 else (0.0 if d_approx == d_ref else math.inf)
    return PlanComparison(float(rel), float(np.clip(pcc, -1.0, 1.0)), float(iou))


# --- kernel error studies --------------------------------------------------

@dataclass
class TheoremCheckReport:
    scenario: str
    params: dict
    max_err_sparse: float = math.nan
    max_err_nystrom: float = math.nan
    max_err_lcn: float = math.nan
    predicted: dict = field(default_factory=dict)
    measured: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.flags.values())

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ok"] = self.ok
        return d


def _lcn_dense(P, Q, pairs, L, lam):
    F = build_factors(P, Q, L, CostFunction.EUCLIDEAN, lam)
    S = build_sparse(P, Q, pairs, CostFunction.EUCLIDEAN, lam)
    corr = build_correction(S, F)
    K_nys = F.dense()
    return S.dense(), K_nys, K_nys + corr.dense()


def clustered_error_study(c: int = 4, D: float = 10.0, r: float = 0.5, lam: float = 1.0, d: int = 2,
                          n_per_cluster: int = 40, seed: int = 0, rel_tol: float = 0.1) -> TheoremCheckReport:
    """Maximum kernel errors of sparse, Nyström and LCN on well-separated clusters.

    LSH is k-means with one bucket per cluster and the Nyström landmarks sit
    on the cluster centers, which is the worst-case setting with closed-form
    maximum errors.
    """
    if not (r > 0 and D > 0 and r / D <= 0.1):
        raise LcnOtError(f"clustered scenario needs 0 < r/D <= 0.1, got r={r}, D={D}")
    rng = np.random.default_rng(seed)
    Xp, lp, centers = extremal_clusters(c, D, r, d, n_per_cluster, rng)
    Xq, lq, _ = extremal_clusters(c, D, r, d, n_per_cluster, rng)
    P, Q = PointSet(Xp), PointSet(Xq)
    cfg = LshConfig(LshScheme.KMEANS, buckets_per_fn=c, seed=seed)
    buckets = hash_kmeans(np.vstack([Xp, Xq]), cfg)[:, 0]
    labels = np.concatenate([lp, lq])
    # premise: every bucket covers a whole cluster
    premise = all(np.unique(buckets[labels == a]).size == 1 for a in range(c))
    pairs = neighbor_pairs(buckets[:P.n], buckets[P.n:])
    K = build_kernel(build_cost(P, Q, CostFunction.EUCLIDEAN, lam)).dense()
    K_sp, K_nys, K_lcn = _lcn_dense(P, Q, pairs, LandmarkSet(centers), lam)

    same = lp[:, None] == lq[None, :]
    err_sp = float(np.max(K - K_sp))
    err_nys = float(np.max(np.abs(K - K_nys)))
    err_lcn = float(np.max(np.abs(K - K_lcn)))
    err_nys_intra = float(np.max((K - K_nys)[same]))
    e = math.exp
    pred_sp = e(-(D - 2 * r) / lam)
    pred_nys = 1 - e(-2 * r / lam)
    pred_lcn = pred_sp * (1 - e(-2 * r / lam) * (2 - e(-2 * r / lam)))
    rep = TheoremCheckReport("clustered", dict(c=c, D=D, r=r, lam=lam, d=d, n_per_cluster=n_per_cluster, seed=seed),
                             err_sp, err_nys, err_lcn)
    rep.predicted = dict(sparse=pred_sp, nystrom=pred_nys, lcn=pred_lcn)
    rep.measured = dict(nystrom_intra=err_nys_intra, min_cross_distance=float(cdist(Xp, Xq)[~same].min()))
    rep.flags = dict(
        premise_buckets_cover_clusters=bool(premise),
        sparse_matches_bound=abs(err_sp - pred_sp) <= rel_tol * pred_sp,
        nystrom_intra_matches_bound=abs(err_nys_intra - pred_nys) <= rel_tol * pred_nys,
        lcn_below_nystrom=err_lcn < err_nys,
        lcn_below_twice_sparse_bound=err_lcn < 2 * pred_sp,
    )
    return rep


def uniform_error_study(n: int = 400, d: int = 3, landmarks: int = 20, neighbors: int = 10, lam: float = 0.1,
                        k_max: int = 5, seed: int = 0, tol: float = 1e-3) -> TheoremCheckReport:
    """Nyström error at the k-th nearest neighbor on the unit sphere, and LCN vs Nyström maxima."""
    rng = np.random.default_rng(seed)
    P, Q = PointSet(uniform_sphere(n, d, rng)), PointSet(uniform_sphere(n, d, rng))
    L = select_landmarks(P, Q, landmarks, "kmeans", seed)
    cfg = LshConfig(LshScheme.KMEANS, buckets_per_fn=max(2, round(n / neighbors)), seed=seed)
    b = hash_kmeans(np.vstack([P.points, Q.points]), cfg)[:, 0]
    pairs = neighbor_pairs(b[:n], b[n:])
    C = cdist(P.points, Q.points)
    K = np.exp(-C / lam)
    _, K_nys, K_lcn = _lcn_dense(P, Q, pairs, L, lam)
    nn = np.argsort(C, axis=1)[:, :k_max]
    rows = np.arange(n)[:, None]
    err_k = (K[rows, nn] - K_nys[rows, nn]).mean(axis=0)
    zl = L.landmarks
    Dl = cdist(zl, zl)
    R = float(Dl[np.triu_indices(len(L), 1)].min() / 2) if len(L) > 1 else math.inf
    dm = d - 1  # manifold dimension of the sphere
    x = 2 * R / lam
    nys_mean_bound = dm * gammainc(dm, x) * math.gamma(dm) / x ** dm
    err_nys = float(np.abs(K - K_nys).max())
    err_lcn = float(np.abs(K - K_lcn).max())
    rep = TheoremCheckReport("uniform-manifold", dict(n=n, d=d, landmarks=landmarks, neighbors=neighbors, lam=lam,
                                                      seed=seed), math.nan, err_nys, err_lcn)
    rep.predicted = dict(nystrom_nn_mean_upper=float(nys_mean_bound), R=R)
    rep.measured = dict(nystrom_err_by_k=err_k.tolist(), nystrom_nn_mean=float(K_nys[rows, nn[:, :1]].mean()))
    rep.flags = dict(
        first_neighbor_error_dominates=bool(err_k[0] >= err_k[-1] - tol),
        lcn_max_below_nystrom=err_lcn < err_nys,
    )
    return rep


def kernel_error_study(scenario: str, **params) -> TheoremCheckReport:
    if scenario == "clustered":
        return clustered_error_study(**params)
    if scenario in ("uniform-manifold", "uniform"):
        return uniform_error_study(**params)
    raise ValueError(f"unknown scenario {scenario!r}")


def iteration_bound_study(instances: int = 20, n_max: int = 50, eps: float = 1e-2, seed: int = 0) -> TheoremCheckReport:
    """Observed Sinkhorn iterations against the closed-form bound on supported kernels.

    Even instances use a dense kernel with random marginals. Odd instances
    use a sparse kernel whose pattern contains a perfect matching; their
    marginals are uniform, since a permutation only guarantees a feasible
    plan for those.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for k in range(instances):
        n = int(rng.integers(5, n_max + 1))
        lam = float(rng.choice([0.1, 0.5, 1.0]))
        Xp = rng.random((n, 2))
        Xq = Xp + 0.05 * rng.standard_normal((n, 2))
        P, Q = PointSet(Xp), PointSet(Xq)
        p = rng.random(n) + 0.5
        q = rng.random(n) + 0.5
        marg = Marginals(p / p.sum(), q / q.sum())
        if k % 2 == 0:
            op = DenseOperator(build_kernel(build_cost(P, Q, lam=lam)))
        else:
            marg = Marginals.uniform(n, n)
            C = cdist(Xp, Xq)
            kth = np.sort(C, axis=1)[:, min(3, n - 1)][:, None]
            mask = (C <= kth) | np.eye(n, dtype=bool)
            pairs = NeighborPairs.from_arrays(*np.nonzero(mask), (n, n))
            assert has_support(pairs, check_total=False) is not Support.NONE
            op = SparseOperator(build_sparse(P, Q, pairs, lam=lam), lam)
        res = sinkhorn(op, marg, tol=eps, max_iters=1_000_000, check_support=False)
        bound = iteration_bound(op, marg, eps)
        rows.append(dict(n=n, lam=lam, variant=op.variant, iters=res.iters, bound=bound, converged=res.converged))
    rep = TheoremCheckReport("iteration-bound", dict(instances=instances, n_max=n_max, eps=eps, seed=seed))
    rep.measured = dict(instances=rows)
    rep.predicted = dict(spot_value=iteration_bound(-1.0, eps=0.1, min_marginal=0.1))
    rep.flags = dict(all_converged=all(r["converged"] for r in rows),
                     iters_within_bound=all(r["iters"] <= r["bound"] for r in rows))
    return rep


def kl_divergence(P: np.ndarray, Q: np.ndarray) -> float:
    mask = P > 0
    if np.any(Q[mask] <= 0):
        return math.inf
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])) - P.sum() + Q.sum())


def sinkhorn_error_study(n: int = 40, lam: float = 0.1, landmarks: int = 5, eps: float = 0.05,
                         sizes=(1, 2, 4, 8, 16, None), seed: int = 0) -> TheoremCheckReport:
    """Distance and plan error of LCN as its sparse correction grows to the full matrix.

    Corrections are nested k-nearest-neighbor patterns; ``None`` means all
    pairs, at which point the kernel error is zero and the error bound applies.
    """
    rng = np.random.default_rng(seed)
    Xp, Xq = rng.random((n, 2)), rng.random((n, 2))
    P, Q = PointSet(Xp), PointSet(Xq)
    marg = Marginals.uniform(n, n)
    C = cdist(Xp, Xq)
    rho = float(cdist(np.vstack([Xp, Xq]), np.vstack([Xp, Xq])).max())
    eps_prime = min(1.0, eps / (50 * (rho + lam * math.log(lam * n / eps))))
    threshold = eps_prime / 2 * math.exp(-rho / lam)
    ref = sinkhorn(DenseOperator(build_kernel(build_cost(P, Q, lam=lam))), marg, tol=eps_prime / 2, max_iters=100_000)
    P_ref = ref.plan.dense()
    K = np.exp(-C / lam)
    L = select_landmarks(P, Q, landmarks, "kmeans", seed)
    F = build_factors(P, Q, L, CostFunction.EUCLIDEAN, lam)
    order = np.argsort(C, axis=1)
    steps = []
    for k in sizes:
        if k is None or k >= n:
            pairs = NeighborPairs.full(n, n)
        else:
            pairs = NeighborPairs.from_arrays(np.repeat(np.arange(n), k), order[:, :k].ravel(), (n, n))
        S = build_sparse(P, Q, pairs, lam=lam)
        op = LcnOperator(F, build_correction(S, F), lam, S)
        try:
            res = sinkhorn(op, marg, tol=eps_prime / 2, max_iters=100_000)
        except LcnOtError as exc:
            steps.append(dict(neighbors=k or n, failed=str(exc)))
            continue
        steps.append(dict(neighbors=k or n, max_kernel_err=float(np.abs(op.dense() - K).max()),
                          abs_dist_err=abs(res.distance - ref.distance),
                          kl=kl_divergence(P_ref, res.plan.dense())))
    ok = [s for s in steps if "failed" not in s]
    rep = TheoremCheckReport("sinkhorn-error", dict(n=n, lam=lam, landmarks=landmarks, eps=eps, seed=seed))
    rep.predicted = dict(rho=rho, eps_prime=eps_prime, kernel_err_threshold=threshold, dist_bound=eps,
                         kl_bound=eps / lam)
    rep.measured = dict(steps=steps)
    within = [s for s in ok if s["max_kernel_err"] <= threshold]
    rep.flags = dict(
        premise_reached=bool(within),
        bound_holds=all(s["abs_dist_err"] <= eps and s["kl"] <= eps / lam for s in within),
        kl_nonincreasing=all(b["kl"] <= a["kl"] * (1 + 1e-9) + 1e-15 for a, b in zip(ok, ok[1:])),
    )
    return rep


# --- runtime ---------------------------------------------------------------

def runtime_sweep(sizes, variants=("full", "sparse", "nystrom", "lcn"), budget: int = 40, lam: float = 0.05,
                  d: int = 16, iters: int = 20, seed: int = 0, opts: BuildOptions = BuildOptions(),
                  budgets=None, repeats: int = 1) -> list[dict]:
    """Wall time of kernel construction and of a fixed number of Sinkhorn iterations.

    ``sizes`` must be nondecreasing. The OT phase always runs exactly
    ``iters`` iterations so that timings are comparable across sizes; with
    ``repeats > 1`` the fastest repetition is reported.
    """
    sizes = list(sizes)
    if any(b < a for a, b in zip(sizes, sizes[1:])):
        raise ValueError("sizes must be monotone")
    budgets = [budget] if budgets is None else list(budgets)
    out = []
    for n in sizes:
        rng = np.random.default_rng([seed, n])
        P, Q = PointSet(uniform_ball(n, d, rng)), PointSet(uniform_ball(n, d, rng))
        marg = Marginals.uniform(n, n)
        for bud in budgets:
            for v in variants:
                op, ms_kernel = timed_build(v, P, Q, lam, Budget.split(v, bud), opts, seed)
                ms_ot = math.inf
                for _ in range(max(1, repeats)):
                    t0 = time.perf_counter()
                    res = sinkhorn(op, marg, tol=-1.0, max_iters=iters, check_support=False)
                    ms_ot = min(ms_ot, 1e3 * (time.perf_counter() - t0))
                out.append(dict(variant=Variant(v).value, n=n, m=n, **{"lambda": lam}, budget=bud, rel_err_d="",
                                pcc="", iou="", iters=res.iters, ms_kernel=round(ms_kernel, 3),
                                ms_ot=round(ms_ot, 3)))
    return out
