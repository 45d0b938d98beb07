"""Synthetic point-set generators for benchmarks and theorem checks."""
from __future__ import annotations

import itertools

import numpy as np

from .geometry import Marginals, PointSet

MAX_PLACEMENT_ATTEMPTS = 1000


def uniform_ball(n: int, d: int, rng: np.random.Generator, radius: float = 1.0) -> np.ndarray:
    """Uniform samples in the ``d``-ball: Gaussian direction times ``radius * U**(1/d)``."""
    g = rng.standard_normal((n, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return g * (radius * rng.random(n) ** (1.0 / d))[:, None]


def uniform_sphere(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples on the unit sphere embedded in ``R^d``."""
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def place_centers(c: int, d: int, D: float, rng: np.random.Generator, box: float | None = None) -> np.ndarray:
    """``c`` random centers in a cube of side ``box`` with pairwise distance at least ``D``."""
    box = 2.0 * D * c ** (1.0 / d) if box is None else box
    centers = np.empty((0, d))
    attempts = 0
    while centers.shape[0] < c:
        attempts += 1
        if attempts > MAX_PLACEMENT_ATTEMPTS:
            raise ValueError(f"could not place {c} centers {D} apart in a box of side {box}")
        x = rng.random(d) * box
        if centers.shape[0] == 0 or np.linalg.norm(centers - x, axis=1).min() >= D:
            centers = np.vstack([centers, x])
    return centers


def clustered(n: int, c: int, D: float, r: float, d: int, rng: np.random.Generator,
              box: float | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``n`` points in ``c`` balls of radius ``r`` around centers at least ``D`` apart.

    Returns ``(points, labels, centers)``.
    """
    centers = place_centers(c, d, D, rng, box)
    labels = np.arange(n) % c
    pts = centers[labels] + uniform_ball(n, d, rng, r)
    return pts, labels, centers


def grid_centers(c: int, d: int, D: float) -> np.ndarray:
    """``c`` centers on an axis-aligned grid with spacing ``D`` (minimum distance exactly ``D``)."""
    side = int(np.ceil(c ** (1.0 / d)))
    pts = [np.array(idx, dtype=float) * D for idx in itertools.product(range(side), repeat=d)]
    return np.array(pts[:c])


def extremal_clusters(c: int, D: float, r: float, d: int, n_per_cluster: int,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Clustered points that include the worst-case configurations.

    Centers sit on a grid with spacing ``D``. Besides random interior points,
    each cluster gets boundary points facing every neighboring cluster at
    distance ``D``, so the closest cross-cluster pair is exactly ``D - 2r``
    apart. Returns ``(points, labels, centers)``.
    """
    centers = grid_centers(c, d, D)
    pts, labels = [], []
    for a in range(c):
        pts.append(centers[a] + uniform_ball(n_per_cluster, d, rng, r))
        labels.extend([a] * n_per_cluster)
        for b in range(c):
            if a != b and np.isclose(np.linalg.norm(centers[b] - centers[a]), D):
                u = (centers[b] - centers[a]) / D
                pts.append((centers[a] + r * u)[None])
                labels.append(a)
    return np.vstack(pts), np.array(labels), centers


def generate(kind: str, params: dict, seed: int) -> tuple[PointSet, PointSet, Marginals]:
    """Build a source/sink pair with uniform marginals.

    ``uniform-ball``: ``n`` (and optional ``m``) points in the ``d``-ball.
    ``clustered``: ``c`` clusters of radius ``r`` with centers ``D`` apart; both
    sets share the centers.
    """
    rng = np.random.default_rng(seed)
    n = int(params["n"])
    m = int(params.get("m", n))
    if kind == "uniform-ball":
        d = int(params.get("d", 16))
        Xp, Xq = uniform_ball(n, d, rng), uniform_ball(m, d, rng)
    elif kind == "clustered":
        d = int(params.get("d", 2))
        c, D, r = int(params["c"]), float(params["D"]), float(params["r"])
        centers = place_centers(c, d, D, rng, params.get("box"))
        Xp = centers[np.arange(n) % c] + uniform_ball(n, d, rng, r)
        Xq = centers[np.arange(m) % c] + uniform_ball(m, d, rng, r)
    else:
        raise ValueError(f"unknown generator {kind!r}")
    return PointSet(Xp, id=f"{kind}-p-{seed}"), PointSet(Xq, id=f"{kind}-q-{seed}"), Marginals.uniform(n, m)
