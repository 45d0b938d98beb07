"""Nyström landmarks and the low-rank kernel factorization ``K_Nys = U A^-1 V``.

``W = A^-1 V`` is precomputed, so a matvec costs ``O((n + m) l)``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DimensionError, FactorizationError, NegativeKernelError
from .geometry import CostFunction, PointSet, pairwise_log_kernel
from .kmeans import dsquared_sample, lloyd

JITTER_START = 1e-10
JITTER_MAX = 1e-4


class LandmarkMethod(str, enum.Enum):
    KMEANS = "kmeans"
    KMEANS_PP = "kmeans++-sampling"


@dataclass(frozen=True)
class LandmarkSet:
    landmarks: np.ndarray
    method: LandmarkMethod | str = LandmarkMethod.KMEANS
    seed: int | None = None

    def __post_init__(self):
        L = np.atleast_2d(np.asarray(self.landmarks, dtype=np.float64))
        if not np.all(np.isfinite(L)):
            raise ValueError("landmarks must be finite")
        object.__setattr__(self, "landmarks", L)

    def __len__(self):
        return self.landmarks.shape[0]


@dataclass(frozen=True)
class NystromFactors:
    U: np.ndarray   # (n, l)
    W: np.ndarray   # (l, m)
    cond_estimate: float = 1.0
    jitter: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.U.shape[0], self.W.shape[1]

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    @classmethod
    def zero(cls, n: int, m: int) -> "NystromFactors":
        return cls(np.zeros((n, 0)), np.zeros((0, m)))

    def dense(self) -> np.ndarray:
        return self.U @ self.W

    def entries(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        """``K_Nys[rows, cols]`` without forming the dense matrix."""
        return np.einsum("kl,lk->k", self.U[rows], self.W[:, cols])


def select_landmarks(P: PointSet, Q: PointSet, l: int, method: LandmarkMethod | str = LandmarkMethod.KMEANS,
                     seed: int = 0, iters: int = 10) -> LandmarkSet:
    method = LandmarkMethod(method)
    X = np.vstack([P.points, Q.points])
    if not 1 <= l <= X.shape[0]:
        raise ValueError(f"landmark count {l} outside [1, {X.shape[0]}]")
    rng = np.random.default_rng(seed)
    if method is LandmarkMethod.KMEANS:
        centroids, _ = lloyd(X, l, iters, rng)
        return LandmarkSet(centroids, method, seed)
    return LandmarkSet(X[dsquared_sample(X, l, rng)], method, seed)


def invert_apply(A: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve ``A W = V`` for symmetric PSD ``A`` via Cholesky with escalating jitter."""
    l = A.shape[0]
    scale = np.trace(A) / l
    jitter = 0.0
    factor = JITTER_START
    while True:
        try:
            cho = linalg.cho_factor(A + jitter * np.eye(l), lower=True, check_finite=True)
            W = linalg.cho_solve(cho, V)
            if np.all(np.isfinite(W)):
                return W, jitter
        except (linalg.LinAlgError, ValueError):
            pass
        if factor > JITTER_MAX * (1 + 1e-9):
            raise FactorizationError(f"landmark kernel matrix ({l}x{l}) is singular beyond jitter {JITTER_MAX}*trace/l")
        jitter = factor * scale
        factor *= 10.0


def build_factors(P: PointSet, Q: PointSet, L: LandmarkSet, cost=CostFunction.EUCLIDEAN,
                  lam: float = 1.0) -> NystromFactors:
    if not (P.dim == Q.dim == L.landmarks.shape[1]):
        raise DimensionError("points and landmarks disagree on dimension")
    Z = L.landmarks
    U = np.exp(pairwise_log_kernel(P.points, Z, cost, lam))
    A = np.exp(pairwise_log_kernel(Z, Z, cost, lam))
    A = 0.5 * (A + A.T)
    V = np.exp(pairwise_log_kernel(Z, Q.points, cost, lam))
    W, jitter = invert_apply(A, V)
    return NystromFactors(U, W, float(np.linalg.cond(A)), jitter)


def nys_matvec(F: NystromFactors, t: np.ndarray, transpose: bool = False, check: bool = True) -> np.ndarray:
    """``U (W t)``, or ``W^T (U^T t)`` with ``transpose``."""
    t = np.asarray(t, dtype=np.float64)
    out = F.W.T @ (F.U.T @ t) if transpose else F.U @ (F.W @ t)
    if check and F.rank and np.all(t > 0) and np.any(out <= 0):
        bad = int(np.sum(out <= 0))
        raise NegativeKernelError(f"{bad} nonpositive entries in Nyström matvec with positive input", "nystrom")
    return out
