"""Sparse kernel from neighbor pairs, the LCN correction and the support check."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import StabilizationError
from .geometry import CostFunction, PointSet, paired_cost
from .lsh import NeighborPairs
from .nystrom import NystromFactors

TOTAL_SUPPORT_MAX = 64


def segment_logsumexp(vals: np.ndarray, indptr: np.ndarray) -> np.ndarray:
    """Log-sum-exp of ``vals[indptr[k]:indptr[k+1]]`` per segment; empty segments give ``-inf``."""
    nseg = indptr.size - 1
    out = np.full(nseg, -np.inf)
    lengths = np.diff(indptr)
    nonempty = np.flatnonzero(lengths)
    if nonempty.size == 0:
        return out
    starts = indptr[:-1][nonempty]
    seg_max = np.maximum.reduceat(vals, starts)
    shift = np.where(np.isfinite(seg_max), seg_max, 0.0)
    shifted = np.exp(vals - np.repeat(shift, lengths[nonempty]))
    with np.errstate(divide="ignore"):  # all-zero segment -> -inf
        out[nonempty] = np.log(np.add.reduceat(shifted, starts)) + shift
    return out


@dataclass(frozen=True)
class _Layout:
    """Row-major (CSR) and column-major views of one pattern."""

    indptr: np.ndarray
    cols: np.ndarray
    t_indptr: np.ndarray
    t_rows: np.ndarray
    t_perm: np.ndarray

    @classmethod
    def of(cls, pattern: NeighborPairs) -> "_Layout":
        perm = np.argsort(pattern.cols, kind="stable")
        t_indptr = np.concatenate([[0], np.cumsum(pattern.col_counts())])
        return cls(pattern.indptr(), pattern.cols, t_indptr, pattern.rows[perm], perm)


@dataclass(frozen=True)
class SparseKernel:
    """Kernel entries ``log K_ij`` on a pattern; entries off the pattern are zero."""

    pattern: NeighborPairs
    logvals: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.pattern.shape

    @property
    def nnz(self) -> int:
        return len(self.pattern)

    @cached_property
    def layout(self) -> _Layout:
        return _Layout.of(self.pattern)

    def log_matvec(self, log_t: np.ndarray) -> np.ndarray:
        """``log(K t)`` from ``log t`` via per-row log-sum-exp."""
        lay = self.layout
        return segment_logsumexp(self.logvals + log_t[lay.cols], lay.indptr)

    def log_rmatvec(self, log_s: np.ndarray) -> np.ndarray:
        lay = self.layout
        return segment_logsumexp(self.logvals[lay.t_perm] + log_s[lay.t_rows], lay.t_indptr)

    def dense(self) -> np.ndarray:
        K = np.zeros(self.shape)
        K[self.pattern.rows, self.pattern.cols] = np.exp(self.logvals)
        return K

    def dense_log(self) -> np.ndarray:
        L = np.full(self.shape, -np.inf)
        L[self.pattern.rows, self.pattern.cols] = self.logvals
        return L

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["i", "j", "logK"])
            w.writerows(zip(self.pattern.rows.tolist(), self.pattern.cols.tolist(),
                            (repr(float(v)) for v in self.logvals)))


@dataclass(frozen=True)
class LcnCorrection:
    """Linear-space differences ``K_ij - K_Nys,ij`` on the sparse pattern."""

    pattern: NeighborPairs
    delta: np.ndarray

    @property
    def shape(self) -> tuple[int, int]:
        return self.pattern.shape

    @cached_property
    def layout(self) -> _Layout:
        return _Layout.of(self.pattern)

    @property
    def max_abs(self) -> float:
        return float(np.abs(self.delta).max()) if self.delta.size else 0.0

    def matvec(self, t: np.ndarray) -> np.ndarray:
        return np.bincount(self.pattern.rows, self.delta * t[self.pattern.cols], minlength=self.shape[0])

    def rmatvec(self, s: np.ndarray) -> np.ndarray:
        return np.bincount(self.pattern.cols, self.delta * s[self.pattern.rows], minlength=self.shape[1])

    def dense(self) -> np.ndarray:
        D = np.zeros(self.shape)
        D[self.pattern.rows, self.pattern.cols] = self.delta
        return D


def build_sparse(P: PointSet, Q: PointSet, pairs: NeighborPairs, cost=CostFunction.EUCLIDEAN,
                 lam: float = 1.0) -> SparseKernel:
    if pairs.shape != (P.n, Q.n):
        raise IndexError(f"pattern shape {pairs.shape} does not match ({P.n}, {Q.n})")
    if not lam > 0:
        raise ValueError(f"regularization lambda must be positive, got {lam}")
    c = paired_cost(P.points[pairs.rows], Q.points[pairs.cols], cost)
    logvals = -c / lam
    logvals.setflags(write=False)
    return SparseKernel(pairs, logvals)


def build_correction(S: SparseKernel, F: NystromFactors) -> LcnCorrection:
    if S.shape != F.shape:
        raise ValueError(f"shape mismatch: sparse {S.shape} vs Nyström {F.shape}")
    with np.errstate(over="ignore"):
        exact = np.exp(S.logvals)
    if not np.all(np.isfinite(exact)):
        raise StabilizationError("kernel overflow while forming the LCN correction", "lcn")
    delta = exact - F.entries(S.pattern.rows, S.pattern.cols)
    return LcnCorrection(S.pattern, delta)


def sparse_matvec(op: SparseKernel | LcnCorrection, t: np.ndarray, transpose: bool = False) -> np.ndarray:
    """Matrix-vector product restricted to stored entries.

    Sparse kernels accumulate in log space when ``t`` is nonnegative; the
    correction (which may be negative) always accumulates linearly.
    """
    t = np.asarray(t, dtype=np.float64)
    if isinstance(op, LcnCorrection):
        return op.rmatvec(t) if transpose else op.matvec(t)
    if np.all(t >= 0):
        with np.errstate(divide="ignore"):
            lt = np.log(t)
        return np.exp(op.log_rmatvec(lt) if transpose else op.log_matvec(lt))
    vals = np.exp(op.logvals)
    if transpose:
        return np.bincount(op.pattern.cols, vals * t[op.pattern.rows], minlength=op.shape[1])
    return np.bincount(op.pattern.rows, vals * t[op.pattern.cols], minlength=op.shape[0])


class Support(str, enum.Enum):
    NONE = "none"
    SUPPORT = "support"
    TOTAL = "total_support"


def _matching_size(rows: np.ndarray, cols: np.ndarray, shape: tuple[int, int]) -> int:
    n, m = shape
    if n == 0 or m == 0 or rows.size == 0:
        return 0
    G = csr_matrix((np.ones(rows.size), (rows, cols)), shape=shape)
    match = maximum_bipartite_matching(G, perm_type="column")
    return int(np.sum(match >= 0))


def has_support(pattern: NeighborPairs, shape: tuple[int, int] | None = None,
                check_total: bool = True) -> Support:
    """Whether the pattern has a strictly positive generalized diagonal.

    Rectangular patterns are checked for a matching that covers the smaller
    side. Total support (every stored entry lies on such a matching) is only
    checked when ``min(n, m) <= 64``; larger inputs report plain support.
    """
    shape = pattern.shape if shape is None else tuple(shape)
    n, m = shape
    k = min(n, m)
    rows, cols = pattern.rows, pattern.cols
    if k == 0 or rows.size == 0 or _matching_size(rows, cols, shape) < k:
        return Support.NONE
    if not check_total or k > TOTAL_SUPPORT_MAX:
        return Support.SUPPORT
    G = csr_matrix((np.ones(rows.size), (rows, cols)), shape=shape)
    match = maximum_bipartite_matching(G, perm_type="column")
    for i, j in zip(rows.tolist(), cols.tolist()):
        if match[i] == j:
            continue
        keep = (rows != i) & (cols != j)
        r, c = rows[keep], cols[keep]
        r = r - (r > i)
        c = c - (c > j)
        if k - 1 > 0 and _matching_size(r, c, (n - 1, m - 1)) < k - 1:
            return Support.SUPPORT
    return Support.TOTAL

