"""Locality-sensitive hashing producing the neighbor pairs of the sparse kernel.

Two points are neighbors if any hash band matches on all of its ``r`` hash
functions (AND within a band, OR across bands).
"""
from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import CostFunction, PointSet
from .kmeans import hierarchical_kmeans, lloyd


class LshScheme(str, enum.Enum):
    CROSS_POLYTOPE = "cross-polytope"
    KMEANS = "kmeans"
    HIERARCHICAL_KMEANS = "hierarchical-kmeans"


@dataclass(frozen=True)
class LshConfig:
    scheme: LshScheme = LshScheme.KMEANS
    bands: int = 1
    rows_per_band: int = 1
    buckets_per_fn: int = 2
    kmeans_iters: int = 10
    branching: int = 2
    seed: int = 0
    allow_kmeans_bands: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", LshScheme(self.scheme))
        if self.bands < 1 or self.rows_per_band < 1:
            raise ValueError("bands and rows_per_band must be positive")
        if self.buckets_per_fn < 2:
            raise ValueError("buckets_per_fn must be at least 2")
        if self.kmeans_iters < 0:
            raise ValueError("kmeans_iters must be nonnegative")
        if self.branching < 1:
            raise ValueError("branching must be positive")
        if self.scheme is not LshScheme.CROSS_POLYTOPE and self.bands > 1 and not self.allow_kmeans_bands:
            raise ValueError("k-means LSH uses a single band; set allow_kmeans_bands to override")

    @property
    def n_functions(self) -> int:
        return self.bands * self.rows_per_band


@dataclass(frozen=True)
class NeighborPairs:
    """Deduplicated ``(i, j)`` pairs stored sorted in row-major order."""

    rows: np.ndarray
    cols: np.ndarray
    shape: tuple[int, int]

    @classmethod
    def from_pairs(cls, pairs, shape) -> "NeighborPairs":
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        return cls.from_arrays(arr[:, 0], arr[:, 1], shape)

    @classmethod
    def from_arrays(cls, rows, cols, shape) -> "NeighborPairs":
        n, m = shape
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= m):
            raise IndexError(f"pair index out of range for shape {shape}")
        keys = np.unique(rows * m + cols)
        r, c = np.divmod(keys, m)
        r.setflags(write=False)
        c.setflags(write=False)
        return cls(r, c, (int(n), int(m)))

    @classmethod
    def full(cls, n: int, m: int) -> "NeighborPairs":
        r, c = np.divmod(np.arange(n * m, dtype=np.int64), m)
        return cls(r, c, (n, m))

    @classmethod
    def empty(cls, n: int, m: int) -> "NeighborPairs":
        e = np.zeros(0, dtype=np.int64)
        return cls(e, e, (n, m))

    def __len__(self):
        return self.rows.size

    def __contains__(self, ij):
        i, j = ij
        k = i * self.shape[1] + j
        keys = self.rows * self.shape[1] + self.cols
        pos = np.searchsorted(keys, k)
        return bool(pos < keys.size and keys[pos] == k)

    def as_set(self) -> set[tuple[int, int]]:
        return set(zip(self.rows.tolist(), self.cols.tolist()))

    def row_counts(self) -> np.ndarray:
        return np.bincount(self.rows, minlength=self.shape[0])

    def col_counts(self) -> np.ndarray:
        return np.bincount(self.cols, minlength=self.shape[1])

    def indptr(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.row_counts())])

    def union(self, other: "NeighborPairs") -> "NeighborPairs":
        if other.shape != self.shape:
            raise ValueError("shape mismatch")
        return NeighborPairs.from_arrays(np.concatenate([self.rows, other.rows]),
                                         np.concatenate([self.cols, other.cols]), self.shape)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["i", "j"])
            w.writerows(zip(self.rows.tolist(), self.cols.tolist()))


def _as_array(X) -> np.ndarray:
    return X.points if isinstance(X, PointSet) else np.atleast_2d(np.asarray(X, dtype=np.float64))


def cross_polytope_projections(dim: int, cfg: LshConfig) -> np.ndarray:
    """Gaussian projections of shape ``(B*r, d, b/2)`` drawn from ``cfg.seed``."""
    if cfg.buckets_per_fn % 2:
        raise ValueError("cross-polytope LSH needs an even bucket count")
    if dim < 1:
        raise ValueError("cross-polytope LSH needs d >= 1")
    rng = np.random.default_rng(cfg.seed)
    return rng.standard_normal((cfg.n_functions, dim, cfg.buckets_per_fn // 2))


def hash_cross_polytope(X, cfg: LshConfig, projections: np.ndarray | None = None) -> np.ndarray:
    """Composite bucket id per point and band, shape ``(n, B)``.

    Each hash function maps ``x`` to ``argmax([x R, -x R])``; the ``r``
    function values of a band are combined as a mixed-radix integer.
    """
    if cfg.scheme is not LshScheme.CROSS_POLYTOPE:
        raise ValueError(f"config scheme is {cfg.scheme.value}, not cross-polytope")
    if cfg.buckets_per_fn % 2:
        raise ValueError("cross-polytope LSH needs an even bucket count")
    X = _as_array(X)
    if X.shape[1] == 0:
        raise ValueError("cross-polytope LSH needs d >= 1")
    b, r = cfg.buckets_per_fn, cfg.rows_per_band
    if r * np.log2(b) >= 62:
        raise ValueError("b**r overflows 64-bit bucket ids")
    R = cross_polytope_projections(X.shape[1], cfg) if projections is None else np.asarray(projections, dtype=float)
    if R.ndim == 2:
        R = R[None]
    if R.shape[0] != cfg.n_functions or R.shape[1] != X.shape[1] or 2 * R.shape[2] != b:
        raise ValueError(f"projection shape {R.shape} does not match config and data")
    proj = np.einsum("nd,fdk->fnk", X, R)
    h = np.concatenate([proj, -proj], axis=2).argmax(axis=2)  # (functions, n)
    h = h.reshape(cfg.bands, r, X.shape[0])
    radix = b ** np.arange(r, dtype=np.int64)
    return np.einsum("brn,r->nb", h.astype(np.int64), radix)


def hash_kmeans(X_union, cfg: LshConfig, n_buckets: int | None = None) -> np.ndarray:
    """Cluster index per point and band, shape ``(n, B)``; clusters are the buckets."""
    if cfg.scheme is LshScheme.CROSS_POLYTOPE:
        raise ValueError("config scheme is cross-polytope, not k-means")
    X = _as_array(X_union)
    if X.shape[0] == 0:
        raise ValueError("k-means LSH on empty input")
    k = cfg.buckets_per_fn if n_buckets is None else n_buckets
    if k > X.shape[0]:
        raise ValueError(f"{k} buckets requested for {X.shape[0]} points")
    if cfg.bands > 1:
        warnings.warn("k-means LSH with several bands: samples are highly correlated", stacklevel=2)
    out = np.empty((X.shape[0], cfg.bands), dtype=np.int64)
    for band in range(cfg.bands):
        rng = np.random.default_rng([cfg.seed, band])
        if cfg.scheme is LshScheme.KMEANS:
            _, labels = lloyd(X, k, cfg.kmeans_iters, rng)
        else:
            labels = hierarchical_kmeans(X, k, cfg.branching, cfg.kmeans_iters, rng)
        out[:, band] = labels
    return out


def neighbor_pairs(buckets_p: np.ndarray, buckets_q: np.ndarray, cfg: LshConfig | None = None) -> NeighborPairs:
    """Pairs whose composite bucket agrees in at least one band.

    Pairs are extracted per band by sorting the sink points by bucket and
    slicing, so the cost is linear in the number of produced pairs.
    """
    bp = np.asarray(buckets_p, dtype=np.int64)
    bq = np.asarray(buckets_q, dtype=np.int64)
    if bp.ndim == 1:
        bp = bp[:, None]
    if bq.ndim == 1:
        bq = bq[:, None]
    if bp.shape[1] != bq.shape[1]:
        raise ValueError("bucket assignments disagree on the number of bands")
    n, m = bp.shape[0], bq.shape[0]
    all_rows, all_cols = [], []
    for band in range(bp.shape[1]):
        order = np.argsort(bq[:, band], kind="stable")
        sorted_q = bq[order, band]
        lo = np.searchsorted(sorted_q, bp[:, band], side="left")
        hi = np.searchsorted(sorted_q, bp[:, band], side="right")
        counts = hi - lo
        total = int(counts.sum())
        if total == 0:
            continue
        rows = np.repeat(np.arange(n, dtype=np.int64), counts)
        starts = np.repeat(lo - np.concatenate([[0], np.cumsum(counts)[:-1]]), counts)
        cols = order[np.arange(total) + starts]
        all_rows.append(rows)
        all_cols.append(cols)
    if not all_rows:
        return NeighborPairs.empty(n, m)
    return NeighborPairs.from_arrays(np.concatenate(all_rows), np.concatenate(all_cols), (n, m))


def _hash_space(X: np.ndarray, cost: CostFunction) -> np.ndarray:
    # angular costs: cluster on the unit sphere, where squared L2 matches the cosine-derived distance
    if cost is CostFunction.EUCLIDEAN:
        return X
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def lsh_pairs(P: PointSet, Q: PointSet, cfg: LshConfig, cost=CostFunction.EUCLIDEAN) -> NeighborPairs:
    """Hash both sets with shared hash functions and extract the neighbor pairs."""
    cost = CostFunction.parse(cost)
    Xp, Xq = _hash_space(P.points, cost), _hash_space(Q.points, cost)
    if cfg.scheme is LshScheme.CROSS_POLYTOPE:
        R = cross_polytope_projections(P.dim, cfg)
        return neighbor_pairs(hash_cross_polytope(Xp, cfg, R), hash_cross_polytope(Xq, cfg, R))
    labels = hash_kmeans(np.vstack([Xp, Xq]), cfg)
    return neighbor_pairs(labels[:P.n], labels[P.n:])


def buckets_for_degree(n: int, m: int, neighbors: float, rows_per_band: int = 1, even: bool = False) -> int:
    """Buckets per hash function so that ``b**r`` is about ``min(n, m) / neighbors``."""
    if neighbors <= 0:
        raise ValueError("neighbor budget must be positive")
    target = max(min(n, m) / neighbors, 1.0) ** (1.0 / rows_per_band)
    b = max(2, int(round(target)))
    if even and b % 2:
        b += 1
    return b
