"""Log-domain Sinkhorn over any kernel operator.

One iteration is an ``s`` update followed by a ``t`` update. After the ``t``
update the column sums match ``q`` up to rounding, so the marginal error is
measured on the rows (plus any column whose kernel column is empty). The row
product ``K t`` computed for that check is reused by the next ``s`` update.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import LcnOtError, StabilizationError
from .geometry import Marginals
from .operators import (BpOperator, DenseOperator, KernelOperator, LcnOperator, NystromOperator,
                        SparseOperator)
from .sparse import Support, has_support

log = logging.getLogger(__name__)

DEFAULT_MAX_ITERS = 500
ENTROPY_FLOOR = 1e-300


class StaleGradientWarning(UserWarning):
    pass


class SupportWarning(UserWarning):
    pass


@dataclass
class SinkhornResult:
    distance: float
    log_s: np.ndarray
    log_t: np.ndarray
    iters: int
    converged: bool
    marginal_err: float
    err_trace: list[float]
    op: KernelOperator = field(repr=False)
    empty_rows: int = 0
    empty_cols: int = 0

    @property
    def lam(self) -> float:
        return self.op.lam

    @property
    def s(self) -> np.ndarray:
        return np.exp(self.log_s)

    @property
    def t(self) -> np.ndarray:
        return np.exp(self.log_t)

    @property
    def plan(self):
        return self.op.plan(self.log_s, self.log_t)


def default_tol(marg: Marginals) -> float:
    return 1e-6 * (marg.p.sum() + marg.q.sum())


def _solve(op: KernelOperator, p: np.ndarray, q: np.ndarray, tol: float, max_iters: int) -> SinkhornResult:
    n, m = op.shape
    if p.size != n or q.size != m:
        raise ValueError(f"marginals of shape ({p.size}, {q.size}) do not match operator {op.shape}")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    log_p, log_q = np.log(p), np.log(q)
    log_t = np.zeros(m)
    log_s = np.zeros(n)
    lk = op.log_matvec(log_t)
    trace: list[float] = []
    converged = False
    err = np.inf
    it = 0
    empty_r = empty_c = np.zeros(0, dtype=bool)
    for it in range(1, max_iters + 1):
        empty_r = np.isneginf(lk)
        log_s = np.where(empty_r, -np.inf, log_p - lk)
        _check_finite(log_s, op, "s")
        lkt = op.log_rmatvec(log_s)
        empty_c = np.isneginf(lkt)
        log_t = np.where(empty_c, -np.inf, log_q - lkt)
        _check_finite(log_t, op, "t")
        lk = op.log_matvec(log_t)
        with np.errstate(invalid="ignore"):
            rows = np.exp(log_s + lk)
        rows = np.nan_to_num(rows, nan=0.0)
        err = float(np.abs(rows - p).sum() + q[empty_c].sum())
        trace.append(err)
        if err <= tol:
            converged = True
            break
    if not converged:
        log.debug("%s: no convergence after %d iterations (err %.3g)", op.variant, it, err)
    res = SinkhornResult(np.nan, log_s, log_t, it, converged, err, trace, op,
                         int(empty_r.sum()), int(empty_c.sum()))
    res.distance = distance_from_scalings(op, log_s, log_t)
    return res


def _check_finite(v: np.ndarray, op: KernelOperator, name: str) -> None:
    if np.any(np.isnan(v)) or np.any(np.isposinf(v)):
        raise StabilizationError(f"non-finite scaling vector {name}", op.variant)


def sinkhorn(op: KernelOperator, marg: Marginals, tol: float | None = None,
             max_iters: int = DEFAULT_MAX_ITERS, check_support: bool = True) -> SinkhornResult:
    """Run Sinkhorn until the L1 marginal error is at most ``tol``.

    Sparse operators without support trigger a ``SupportWarning`` but still run.
    """
    if isinstance(op, BpOperator):
        return sinkhorn_bp(op, marg, tol, max_iters)
    tol = default_tol(marg) if tol is None else tol
    if check_support and isinstance(op, SparseOperator):
        if has_support(op.kernel.pattern, check_total=False) is Support.NONE:
            warnings.warn("sparse kernel has no support; Sinkhorn may not converge", SupportWarning, stacklevel=2)
    return _solve(op, marg.p, marg.q, tol, max_iters)


def bp_marginals(marg: Marginals) -> tuple[np.ndarray, np.ndarray]:
    """Extended marginals ``[p; q]`` (rows) and ``[q; p]`` (columns)."""
    return np.concatenate([marg.p, marg.q]), np.concatenate([marg.q, marg.p])


def sinkhorn_bp(op: BpOperator, marg: Marginals, tol: float | None = None,
                max_iters: int = DEFAULT_MAX_ITERS) -> SinkhornResult:
    if not isinstance(op, BpOperator):
        raise TypeError("sinkhorn_bp needs a BpOperator")
    p_ext, q_ext = bp_marginals(marg)
    tol = 1e-6 * 2 * p_ext.sum() if tol is None else tol
    return _solve(op, p_ext, q_ext, tol, max_iters)


def distance_from_scalings(op: KernelOperator, log_s: np.ndarray, log_t: np.ndarray) -> float:
    """``lambda * (<log s, P 1> + <log t, P^T 1>)``.

    Substituting ``P = diag(s) K diag(t)`` into ``<P, C> - lambda H(P)`` with
    ``C = -lambda log K`` leaves exactly this expression, and it only needs two
    operator matvecs.
    """
    with np.errstate(invalid="ignore"):
        rows = np.nan_to_num(np.exp(log_s + op.log_matvec(log_t)), nan=0.0)
        cols = np.nan_to_num(np.exp(log_t + op.log_rmatvec(log_s)), nan=0.0)
        a = np.where(rows > 0, log_s * rows, 0.0)
        b = np.where(cols > 0, log_t * cols, 0.0)
    return float(op.lam * (a.sum() + b.sum()))


def distance_dense(plan: np.ndarray, C: np.ndarray, lam: float) -> float:
    """``<P, C> - lambda H(P)`` with ``0 log 0 = 0``; entries off the support may have infinite cost."""
    P = np.asarray(plan, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64)
    pos = P > 0
    transport = float(np.sum(P[pos] * C[pos]))
    ent_mask = P > ENTROPY_FLOOR
    neg_entropy = float(np.sum(P[ent_mask] * np.log(P[ent_mask])))
    return transport + lam * neg_entropy


def distance_lcn(result: SinkhornResult) -> float:
    """Distance from the decomposed LCN plan without densification."""
    plan = result.plan
    log_s, log_t = result.log_s, result.log_t
    return float(result.lam * (log_s @ plan.row_sums() + log_t @ plan.col_sums()))


def iteration_bound(op_or_min_log_k, marg: Marginals | None = None, eps: float = 1e-2,
                    min_marginal: float | None = None) -> float:
    """Upper bound on Sinkhorn iterations to reach L1 marginal error ``eps``.

    ``2 + (-4 ln(min_{K_ij > 0} K_ij * min(p_i, q_j))) / eps``.
    """
    if isinstance(op_or_min_log_k, KernelOperator):
        log_k = op_or_min_log_k.min_positive_log_entry()
    else:
        log_k = float(op_or_min_log_k)
    if min_marginal is None:
        if marg is None:
            raise ValueError("need marginals or min_marginal")
        min_marginal = min(marg.p.min(), marg.q.min())
    return 2.0 + (-4.0 * (log_k + np.log(min_marginal))) / eps


# --- gradients -------------------------------------------------------------

@dataclass(frozen=True)
class LcnGradients:
    dU: np.ndarray
    dW: np.ndarray
    dlogK_sp: np.ndarray       # on the correction pattern
    dlogK_sp_nys: np.ndarray   # on the correction pattern


def grad_cost(result: SinkhornResult):
    """Analytic gradients of the distance at the converged scalings.

    Dense and sparse operators return ``dd/dC = P``. Nyström and LCN
    operators return an ``LcnGradients`` with respect to the factors ``U``
    and ``W = A^-1 V`` and the log kernel entries on the pattern. The sparse
    Nyström entries enter the kernel with a negative sign, so their gradient
    is ``+lambda P_sp_nys``.
    """
    if not result.converged:
        warnings.warn("gradient requested before convergence", StaleGradientWarning, stacklevel=2)
    op = result.op
    if isinstance(op, (DenseOperator, SparseOperator)):
        return result.plan.dense() if isinstance(op, DenseOperator) else result.plan
    if isinstance(op, NystromOperator):
        lam = op.lam
        s, t = result.s, result.t
        F = op.factors
        dU = -lam * np.outer(s, F.W @ t)
        dW = -lam * np.outer(F.U.T @ s, t)
        if isinstance(op, LcnOperator):
            plan = result.plan
            return LcnGradients(dU, dW, -lam * plan.sp, lam * plan.sp_nys)
        e = np.zeros(0)
        return LcnGradients(dU, dW, e, e)
    raise TypeError(f"no analytic gradient for operator {type(op).__name__}")


# --- multi-head ------------------------------------------------------------

def head_lambdas(heads: int, lam: float) -> np.ndarray:
    """``lambda_k = 2**(k - K/2) * lambda`` for ``k = 1..K``."""
    if heads < 1:
        raise ValueError("need at least one head")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    k = np.arange(1, heads + 1)
    return 2.0 ** (k - heads / 2.0) * lam


@dataclass
class MultiHeadResult:
    lambdas: np.ndarray
    distances: np.ndarray
    results: list
    errors: dict[int, Exception]


def multihead(ops: Sequence[KernelOperator] | Callable[[float], KernelOperator], marg: Marginals,
              heads: int, lam: float, tol: float | None = None,
              max_iters: int = DEFAULT_MAX_ITERS) -> MultiHeadResult:
    """Independent Sinkhorn solves over the geometric ``lambda`` schedule.

    ``ops`` is either one prebuilt operator per head or a factory called with
    each head's ``lambda``. A failing head yields ``nan`` and its exception
    is recorded in ``errors``; the other heads still run.
    """
    lams = head_lambdas(heads, lam)
    if not callable(ops) and len(ops) != heads:
        raise ValueError(f"expected {heads} operators, got {len(ops)}")
    dists = np.full(heads, np.nan)
    results: list = [None] * heads
    errors: dict[int, Exception] = {}
    for k, lam_k in enumerate(lams):
        try:
            op = ops(lam_k) if callable(ops) else ops[k]
            res = sinkhorn(op, marg, tol, max_iters)
            results[k] = res
            dists[k] = res.distance
        except (LcnOtError, ValueError, FloatingPointError) as exc:
            errors[k] = exc
    return MultiHeadResult(lams, dists, results, errors)
