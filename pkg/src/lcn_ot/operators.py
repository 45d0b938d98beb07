"""Kernel operators consumed by the Sinkhorn solver.

Every operator exposes ``log_matvec(log_t) = log(K t)`` and
``log_rmatvec(log_s) = log(K^T s)`` plus plan extraction from converged
log-scalings. Dense and sparse variants work entirely in log space; the
Nyström-based variants shift the input by its maximum, multiply in linear
space, and take the log of the (checked positive) result.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import NegativeKernelError
from .geometry import DenseKernel
from .nystrom import NystromFactors
from .sparse import LcnCorrection, SparseKernel

DENSE_BLOCK = 1 << 21  # elements per temporary block in dense reductions


def _lse_rows(L: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``log sum_j exp(L_ij + v_j)`` per row, in row blocks."""
    n, m = L.shape
    out = np.empty(n)
    step = max(1, DENSE_BLOCK // max(m, 1))
    for a in range(0, n, step):
        M = L[a:a + step] + v[None, :]
        mx = M.max(axis=1, keepdims=True)
        mx = np.where(np.isfinite(mx), mx, 0.0)
        M -= mx
        np.exp(M, out=M)
        with np.errstate(divide="ignore"):
            out[a:a + step] = np.log(M.sum(axis=1)) + mx[:, 0]
    return out


def _lse_cols(L: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``log sum_i exp(L_ij + v_i)`` per column, in column blocks."""
    n, m = L.shape
    out = np.empty(m)
    step = max(1, DENSE_BLOCK // max(n, 1))
    for a in range(0, m, step):
        M = L[:, a:a + step] + v[:, None]
        mx = M.max(axis=0, keepdims=True)
        mx = np.where(np.isfinite(mx), mx, 0.0)
        M -= mx
        np.exp(M, out=M)
        with np.errstate(divide="ignore"):
            out[a:a + step] = np.log(M.sum(axis=0)) + mx[0]
    return out


def _shifted_exp(log_v: np.ndarray) -> tuple[np.ndarray, float]:
    mx = np.max(log_v) if log_v.size else 0.0
    if not np.isfinite(mx):
        mx = 0.0
    return np.exp(log_v - mx), mx


def _safe_log(x: np.ndarray, variant: str) -> np.ndarray:
    if np.any(x <= 0):
        bad = int(np.sum(x <= 0))
        raise NegativeKernelError(f"{bad} nonpositive entries in kernel matvec", variant)
    return np.log(x)


# --- plans ----------------------------------------------------------------

@dataclass(frozen=True)
class DensePlan:
    P: np.ndarray

    def dense(self) -> np.ndarray:
        return self.P

    def row_sums(self):
        return self.P.sum(1)

    def col_sums(self):
        return self.P.sum(0)


@dataclass(frozen=True)
class SparsePlan:
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    shape: tuple[int, int]

    def dense(self) -> np.ndarray:
        P = np.zeros(self.shape)
        P[self.rows, self.cols] = self.vals
        return P

    def row_sums(self):
        return np.bincount(self.rows, self.vals, minlength=self.shape[0])

    def col_sums(self):
        return np.bincount(self.cols, self.vals, minlength=self.shape[1])


@dataclass(frozen=True)
class LcnPlan:
    """``P = P_U P_W + P_sp - P_sp_nys`` with the sparse parts on a shared pattern."""

    P_U: np.ndarray       # diag(s) U, (n, l)
    P_W: np.ndarray       # W diag(t), (l, m)
    rows: np.ndarray
    cols: np.ndarray
    sp: np.ndarray        # s_i K_ij t_j on the pattern
    sp_nys: np.ndarray    # s_i K_Nys,ij t_j on the pattern

    @property
    def shape(self):
        return self.P_U.shape[0], self.P_W.shape[1]

    @property
    def delta(self) -> np.ndarray:
        return self.sp - self.sp_nys

    def dense(self) -> np.ndarray:
        P = self.P_U @ self.P_W
        np.add.at(P, (self.rows, self.cols), self.delta)
        return P

    def row_sums(self):
        n, m = self.shape
        return self.P_U @ self.P_W.sum(1) + np.bincount(self.rows, self.delta, minlength=n)

    def col_sums(self):
        n, m = self.shape
        return self.P_U.sum(0) @ self.P_W + np.bincount(self.cols, self.delta, minlength=m)


@dataclass(frozen=True)
class BpPlan:
    """Quadrants of the extended plan.

    Only the total of the deletion-deletion block enters the distance (its
    cost is zero); the scalings ``s_eps``/``t_eps`` are kept so the block can
    still be densified for inspection.
    """

    inner: object
    del_p: np.ndarray     # mass of source i sent to its deletion slot
    del_q: np.ndarray     # mass of sink j taken from its deletion slot
    eps_eps: float
    s_eps: np.ndarray
    t_eps: np.ndarray

    def dense(self) -> np.ndarray:
        n, m = self.del_p.size, self.del_q.size
        P = np.zeros((n + m, m + n))
        P[:n, :m] = self.inner.dense()
        P[:n, m:] = np.diag(self.del_p)
        P[n:, :m] = np.diag(self.del_q)
        P[n:, m:] = np.outer(self.s_eps, self.t_eps)
        return P

    def row_sums(self):
        return np.concatenate([self.inner.row_sums() + self.del_p, self.del_q + self.s_eps * self.t_eps.sum()])

    def col_sums(self):
        return np.concatenate([self.inner.col_sums() + self.del_q, self.del_p + self.t_eps * self.s_eps.sum()])


# --- operators -------------------------------------------------------------

class KernelOperator:
    variant = "abstract"
    lam: float

    @property
    def shape(self) -> tuple[int, int]:
        raise NotImplementedError

    def log_matvec(self, log_t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_rmatvec(self, log_s: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def plan(self, log_s: np.ndarray, log_t: np.ndarray):
        raise NotImplementedError

    def dense(self) -> np.ndarray:
        """Linear-space kernel matrix; desk scale only."""
        raise NotImplementedError

    def min_positive_log_entry(self) -> float:
        K = self.dense()
        pos = K[K > 0]
        if pos.size == 0:
            raise ValueError("operator has no positive entry")
        return float(np.log(pos.min()))


class DenseOperator(KernelOperator):
    variant = "full"

    def __init__(self, kernel: DenseKernel, lam: float | None = None):
        self.kernel = kernel
        self.logK = np.asarray(kernel.logK, dtype=np.float64)
        self.lam = kernel.lam if lam is None else lam

    @property
    def shape(self):
        return self.logK.shape

    def log_matvec(self, log_t):
        return _lse_rows(self.logK, log_t)

    def log_rmatvec(self, log_s):
        return _lse_cols(self.logK, log_s)

    def plan(self, log_s, log_t):
        with np.errstate(invalid="ignore"):
            logP = log_s[:, None] + self.logK + log_t[None, :]
        return DensePlan(np.exp(np.nan_to_num(logP, nan=-np.inf)))

    def dense(self):
        return np.exp(self.logK)

    def min_positive_log_entry(self):
        finite = self.logK[np.isfinite(self.logK)]
        if finite.size == 0:
            raise ValueError("operator has no positive entry")
        return float(finite.min())


class SparseOperator(KernelOperator):
    variant = "sparse"

    def __init__(self, kernel: SparseKernel, lam: float):
        self.kernel = kernel
        self.lam = lam

    @property
    def shape(self):
        return self.kernel.shape

    def log_matvec(self, log_t):
        return self.kernel.log_matvec(log_t)

    def log_rmatvec(self, log_s):
        return self.kernel.log_rmatvec(log_s)

    def plan(self, log_s, log_t):
        pat = self.kernel.pattern
        with np.errstate(invalid="ignore"):
            logv = log_s[pat.rows] + self.kernel.logvals + log_t[pat.cols]
        return SparsePlan(pat.rows, pat.cols, np.exp(np.nan_to_num(logv, nan=-np.inf)), self.shape)

    def dense(self):
        return self.kernel.dense()

    def min_positive_log_entry(self):
        if self.kernel.nnz == 0:
            raise ValueError("operator has no positive entry")
        return float(self.kernel.logvals.min())


class NystromOperator(KernelOperator):
    variant = "nystrom"

    def __init__(self, factors: NystromFactors, lam: float):
        self.factors = factors
        self.lam = lam

    @property
    def shape(self):
        return self.factors.shape

    def _lin_matvec(self, t):
        return self.factors.U @ (self.factors.W @ t)

    def _lin_rmatvec(self, s):
        return self.factors.W.T @ (self.factors.U.T @ s)

    def log_matvec(self, log_t):
        t, mx = _shifted_exp(log_t)
        return _safe_log(self._lin_matvec(t), self.variant) + mx

    def log_rmatvec(self, log_s):
        s, mx = _shifted_exp(log_s)
        return _safe_log(self._lin_rmatvec(s), self.variant) + mx

    def plan(self, log_s, log_t):
        s, t = np.exp(log_s), np.exp(log_t)
        e = np.zeros(0, dtype=np.int64)
        return LcnPlan(s[:, None] * self.factors.U, self.factors.W * t[None, :], e, e, np.zeros(0), np.zeros(0))

    def dense(self):
        return self.factors.dense()


class LcnOperator(NystromOperator):
    """``K_LCN t = U (W t) + K_delta t``."""

    variant = "lcn"

    def __init__(self, factors: NystromFactors, correction: LcnCorrection, lam: float,
                 sparse: SparseKernel | None = None):
        super().__init__(factors, lam)
        if correction.shape != factors.shape:
            raise ValueError("correction and factors disagree on shape")
        self.correction = correction
        self.sparse = sparse

    def _lin_matvec(self, t):
        return super()._lin_matvec(t) + self.correction.matvec(t)

    def _lin_rmatvec(self, s):
        return super()._lin_rmatvec(s) + self.correction.rmatvec(s)

    def plan(self, log_s, log_t):
        s, t = np.exp(log_s), np.exp(log_t)
        pat = self.correction.pattern
        k_nys = self.factors.entries(pat.rows, pat.cols)
        k_sp = k_nys + self.correction.delta if self.sparse is None else np.exp(self.sparse.logvals)
        st = s[pat.rows] * t[pat.cols]
        return LcnPlan(s[:, None] * self.factors.U, self.factors.W * t[None, :], pat.rows, pat.cols,
                       st * k_sp, st * k_nys)

    def dense(self):
        return self.factors.dense() + self.correction.dense()


class BpOperator(KernelOperator):
    """Bipartite-matching extension ``[[K, diag(del_p)], [diag(del_q), 1]]``.

    Shape is ``(n + m) x (m + n)``. ``del_p``/``del_q`` hold deletion kernel
    values ``exp(-c/lambda)``; zero disables deletion of that point.
    """

    def __init__(self, inner: KernelOperator, del_p: np.ndarray, del_q: np.ndarray):
        n, m = inner.shape
        del_p = np.asarray(del_p, dtype=np.float64).ravel()
        del_q = np.asarray(del_q, dtype=np.float64).ravel()
        if del_p.size != n or del_q.size != m:
            raise ValueError(f"deletion vectors must have lengths {n} and {m}")
        if np.any(del_p < 0) or np.any(del_q < 0) or not (np.all(np.isfinite(del_p)) and np.all(np.isfinite(del_q))):
            raise ValueError("deletion kernel values must be finite and nonnegative")
        self.inner = inner
        self.lam = inner.lam
        self.del_p, self.del_q = del_p, del_q
        with np.errstate(divide="ignore"):
            self.log_del_p, self.log_del_q = np.log(del_p), np.log(del_q)
        self.variant = f"{inner.variant}+bp"

    @classmethod
    def from_costs(cls, inner: KernelOperator, cost_p: np.ndarray, cost_q: np.ndarray) -> "BpOperator":
        return cls(inner, np.exp(-np.asarray(cost_p, float) / inner.lam), np.exp(-np.asarray(cost_q, float) / inner.lam))

    @property
    def shape(self):
        n, m = self.inner.shape
        return n + m, m + n

    def log_matvec(self, log_t):
        n, m = self.inner.shape
        hat, check = log_t[:m], log_t[m:]
        top = np.logaddexp(self.inner.log_matvec(hat), self.log_del_p + check)
        bottom = np.logaddexp(self.log_del_q + hat, logsumexp(check))
        return np.concatenate([top, bottom])

    def log_rmatvec(self, log_s):
        n, m = self.inner.shape
        hat, check = log_s[:n], log_s[n:]
        top = np.logaddexp(self.inner.log_rmatvec(hat), self.log_del_q + check)
        bottom = np.logaddexp(self.log_del_p + hat, logsumexp(check))
        return np.concatenate([top, bottom])

    def plan(self, log_s, log_t):
        n, m = self.inner.shape
        s_hat, s_chk = log_s[:n], log_s[n:]
        t_hat, t_chk = log_t[:m], log_t[m:]
        with np.errstate(invalid="ignore"):
            del_p = np.exp(np.nan_to_num(s_hat + self.log_del_p + t_chk, nan=-np.inf))
            del_q = np.exp(np.nan_to_num(s_chk + self.log_del_q + t_hat, nan=-np.inf))
        eps_eps = float(np.exp(logsumexp(s_chk) + logsumexp(t_chk)))
        return BpPlan(self.inner.plan(s_hat, t_hat), del_p, del_q, eps_eps, np.exp(s_chk), np.exp(t_chk))

    def dense(self):
        n, m = self.inner.shape
        K = np.zeros((n + m, m + n))
        K[:n, :m] = self.inner.dense()
        K[:n, m:] = np.diag(self.del_p)
        K[n:, :m] = np.diag(self.del_q)
        K[n:, m:] = 1.0
        return K
