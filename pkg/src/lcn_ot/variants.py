"""Construct a kernel operator for each Sinkhorn variant from raw point sets."""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .geometry import CostFunction, PointSet, build_cost, build_kernel
from .lsh import LshConfig, LshScheme, NeighborPairs, buckets_for_degree, lsh_pairs
from .nystrom import LandmarkMethod, build_factors, select_landmarks
from .operators import BpOperator, DenseOperator, KernelOperator, LcnOperator, NystromOperator, SparseOperator
from .sparse import build_correction, build_sparse


class Variant(str, enum.Enum):
    FULL = "full"
    SPARSE = "sparse"
    NYSTROM = "nystrom"
    LCN = "lcn"


@dataclass(frozen=True)
class Budget:
    """Average neighbors per point and Nyström landmark count."""

    neighbors: int = 0
    landmarks: int = 0

    @classmethod
    def split(cls, variant: Variant | str, total: int) -> "Budget":
        """Spend a total budget the way the benchmarks do; LCN splits it evenly."""
        variant = Variant(variant)
        if variant is Variant.SPARSE:
            return cls(neighbors=total)
        if variant is Variant.NYSTROM:
            return cls(landmarks=total)
        if variant is Variant.LCN:
            return cls(neighbors=total - total // 2, landmarks=total // 2)
        return cls()

    @property
    def total(self) -> int:
        return self.neighbors + self.landmarks


@dataclass(frozen=True)
class BuildOptions:
    cost: CostFunction = CostFunction.EUCLIDEAN
    lsh_scheme: LshScheme | None = None       # default: k-means for L2, cross-polytope otherwise
    rows_per_band: int = 1
    bands: int = 1
    kmeans_iters: int = 10
    branching: int = 2
    landmark_method: LandmarkMethod | None = None   # default: k-means for L2, k-means++ otherwise
    bp: bool = False
    deletion_cost: float | tuple = field(default=float("inf"))


def lsh_config_for(P: PointSet, Q: PointSet, neighbors: int, opts: BuildOptions, seed: int) -> LshConfig:
    scheme = opts.lsh_scheme
    if scheme is None:
        scheme = LshScheme.KMEANS if opts.cost is CostFunction.EUCLIDEAN else LshScheme.CROSS_POLYTOPE
    scheme = LshScheme(scheme)
    if scheme is LshScheme.CROSS_POLYTOPE:
        b = buckets_for_degree(P.n, Q.n, neighbors, opts.rows_per_band, even=True)
        return LshConfig(scheme, opts.bands, opts.rows_per_band, b, seed=seed)
    k = min(buckets_for_degree(P.n, Q.n, neighbors), P.n + Q.n)
    return LshConfig(scheme, 1, 1, k, opts.kmeans_iters, opts.branching, seed)


def build_pattern(P, Q, neighbors, opts: BuildOptions, seed: int) -> NeighborPairs:
    if neighbors >= max(P.n, Q.n):
        return NeighborPairs.full(P.n, Q.n)
    return lsh_pairs(P, Q, lsh_config_for(P, Q, neighbors, opts, seed), opts.cost)


def build_operator(variant: Variant | str, P: PointSet, Q: PointSet, lam: float, budget: Budget = Budget(),
                   opts: BuildOptions = BuildOptions(), seed: int = 0) -> KernelOperator:
    variant = Variant(variant)
    cost = CostFunction.parse(opts.cost)
    if variant is Variant.FULL:
        op = DenseOperator(build_kernel(build_cost(P, Q, cost, lam)))
    elif variant is Variant.SPARSE:
        if budget.neighbors < 1:
            raise ValueError("sparse Sinkhorn needs a positive neighbor budget")
        op = SparseOperator(build_sparse(P, Q, build_pattern(P, Q, budget.neighbors, opts, seed), cost, lam), lam)
    else:
        if budget.landmarks < 1:
            raise ValueError(f"{variant.value} needs a positive landmark budget")
        method = opts.landmark_method
        if method is None:
            method = LandmarkMethod.KMEANS if cost is CostFunction.EUCLIDEAN else LandmarkMethod.KMEANS_PP
        L = select_landmarks(P, Q, min(budget.landmarks, P.n + Q.n), method, seed)
        F = build_factors(P, Q, L, cost, lam)
        if variant is Variant.NYSTROM:
            op = NystromOperator(F, lam)
        else:
            if budget.neighbors < 1:
                raise ValueError("LCN needs a positive neighbor budget")
            S = build_sparse(P, Q, build_pattern(P, Q, budget.neighbors, opts, seed), cost, lam)
            op = LcnOperator(F, build_correction(S, F), lam, S)
    if opts.bp:
        cp, cq = (opts.deletion_cost, opts.deletion_cost) if np.isscalar(opts.deletion_cost) else opts.deletion_cost
        op = BpOperator.from_costs(op, np.full(P.n, cp), np.full(Q.n, cq))
    return op


def timed_build(*args, **kwargs) -> tuple[KernelOperator, float]:
    """``build_operator`` plus wall time in milliseconds."""
    t0 = time.perf_counter()
    op = build_operator(*args, **kwargs)
    return op, 1e3 * (time.perf_counter() - t0)
