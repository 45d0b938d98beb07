"""Point sets, marginals, cost functions and dense cost/kernel construction.

Kernels are stored as ``log K = -C / lambda`` throughout; nothing in this
module exponentiates.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionError, NonFiniteError

MASS_RTOL = 1e-12


class CostFunction(str, enum.Enum):
    EUCLIDEAN = "euclidean"
    NEGATIVE_DOT = "negative-dot"
    COSINE = "cosine-derived"

    @classmethod
    def parse(cls, value: "str | CostFunction") -> "CostFunction":
        if isinstance(value, cls):
            return value
        aliases = {"l2": cls.EUCLIDEAN, "dot": cls.NEGATIVE_DOT, "cosine": cls.COSINE}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValueError(f"unknown cost function {value!r}") from None


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PointSet:
    """An ordered ``n x d`` collection of points."""

    points: np.ndarray
    id: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DimensionError(f"point set must be a non-empty n x d matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise NonFiniteError(f"point set {self.id!r} has non-finite coordinates")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n


@dataclass(frozen=True)
class Marginals:
    """Source and sink masses ``p`` (length n) and ``q`` (length m)."""

    p: np.ndarray
    q: np.ndarray
    balanced: bool = True

    def __post_init__(self):
        p = np.asarray(self.p, dtype=np.float64).ravel()
        q = np.asarray(self.q, dtype=np.float64).ravel()
        for name, v in (("p", p), ("q", q)):
            if v.size == 0:
                raise DimensionError(f"marginal {name} is empty")
            if not np.all(np.isfinite(v)):
                raise NonFiniteError(f"marginal {name} has non-finite entries")
            if np.any(v <= 0):
                raise ValueError(f"marginal {name} must be strictly positive; remove zero-mass points")
        if self.balanced:
            sp, sq = p.sum(), q.sum()
            if abs(sp - sq) > MASS_RTOL * max(sp, sq):
                raise ValueError(f"unbalanced marginals: sum(p)={sp!r}, sum(q)={sq!r}")
        object.__setattr__(self, "p", _frozen(p))
        object.__setattr__(self, "q", _frozen(q))

    @classmethod
    def uniform(cls, n: int, m: int) -> "Marginals":
        return cls(np.full(n, 1.0 / n), np.full(m, 1.0 / m))

    @property
    def shape(self) -> tuple[int, int]:
        return self.p.size, self.q.size


@dataclass(frozen=True)
class DenseCost:
    C: np.ndarray
    lam: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"regularization lambda must be positive, got {self.lam}")


@dataclass(frozen=True)
class DenseKernel:
    logK: np.ndarray
    lam: float = field(default=1.0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.logK.shape

    def dense(self) -> np.ndarray:
        return np.exp(self.logK)


def pairwise_cost(X: np.ndarray, Y: np.ndarray, cost: CostFunction | str = CostFunction.EUCLIDEAN) -> np.ndarray:
    """Cost matrix between the rows of ``X`` and ``Y``."""
    cost = CostFunction.parse(cost)
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise DimensionError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if cost is CostFunction.EUCLIDEAN:
        return cdist(X, Y)
    if cost is CostFunction.NEGATIVE_DOT:
        return -(X @ Y.T)
    nx = np.linalg.norm(X, axis=1)
    ny = np.linalg.norm(Y, axis=1)
    if np.any(nx == 0) or np.any(ny == 0):
        raise ValueError("cosine-derived cost is undefined for zero vectors")
    cos = (X / nx[:, None]) @ (Y / ny[:, None]).T
    return np.sqrt(np.clip(1.0 - cos, 0.0, 2.0))


def paired_cost(X: np.ndarray, Y: np.ndarray, cost: CostFunction | str = CostFunction.EUCLIDEAN) -> np.ndarray:
    """Cost between matching rows, ``c(X[k], Y[k])``."""
    cost = CostFunction.parse(cost)
    if X.shape != Y.shape:
        raise DimensionError(f"paired inputs differ in shape: {X.shape} vs {Y.shape}")
    if cost is CostFunction.EUCLIDEAN:
        return np.linalg.norm(X - Y, axis=1)
    dot = np.einsum("kd,kd->k", X, Y)
    if cost is CostFunction.NEGATIVE_DOT:
        return -dot
    nn = np.linalg.norm(X, axis=1) * np.linalg.norm(Y, axis=1)
    if np.any(nn == 0):
        raise ValueError("cosine-derived cost is undefined for zero vectors")
    return np.sqrt(np.clip(1.0 - dot / nn, 0.0, 2.0))


def pairwise_log_kernel(X, Y, cost, lam: float) -> np.ndarray:
    if not lam > 0:
        raise ValueError(f"regularization lambda must be positive, got {lam}")
    return -pairwise_cost(X, Y, cost) / lam


def build_cost(P: PointSet, Q: PointSet, cost: CostFunction | str = CostFunction.EUCLIDEAN,
               lam: float = 1.0) -> DenseCost:
    if P.dim != Q.dim:
        raise DimensionError(f"dimension mismatch: {P.dim} vs {Q.dim}")
    return DenseCost(pairwise_cost(P.points, Q.points, cost), lam)


def build_kernel(C: DenseCost) -> DenseKernel:
    if not C.lam > 0:
        raise ValueError(f"regularization lambda must be positive, got {C.lam}")
    with np.errstate(invalid="ignore"):
        logK = -np.asarray(C.C, dtype=np.float64) / C.lam
    return DenseKernel(logK, C.lam)
