"""Lloyd's k-means with k-means++ seeding, D^2 sampling and hierarchical k-means.

Shared by k-means LSH and k-means Nyström landmarks.
"""
from __future__ import annotations

import numpy as np


def sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    d = (X * X).sum(1)[:, None] + (C * C).sum(1)[None, :] - 2.0 * X @ C.T
    return np.maximum(d, 0.0)


def dsquared_sample(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``k`` distinct rows drawn by the k-means++ D^2 rule.

    When every remaining point coincides with a chosen one (all D^2 zero) the
    next index is drawn uniformly from the unchosen rows.
    """
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"cannot sample {k} points from {n}")
    chosen = np.empty(k, dtype=np.int64)
    taken = np.zeros(n, dtype=bool)
    chosen[0] = rng.integers(n)
    taken[chosen[0]] = True
    d2 = sq_dists(X, X[chosen[:1]])[:, 0]
    for i in range(1, k):
        w = np.where(taken, 0.0, d2)
        total = w.sum()
        if total > 0:
            idx = rng.choice(n, p=w / total)
        else:
            idx = rng.choice(np.flatnonzero(~taken))
        chosen[i] = idx
        taken[idx] = True
        d2 = np.minimum(d2, sq_dists(X, X[idx:idx + 1])[:, 0])
    return chosen


def inertia(X: np.ndarray, centroids: np.ndarray, labels: np.ndarray) -> float:
    return float(((X - centroids[labels]) ** 2).sum())


def lloyd(X: np.ndarray, k: int, iters: int = 10, rng: np.random.Generator | None = None,
          init: np.ndarray | None = None, n_init: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Run Lloyd iterations; returns ``(centroids, labels)``.

    Empty clusters are re-seeded with the point farthest from its current
    centroid so that exactly ``k`` clusters survive. With ``n_init > 1`` the
    seeding is repeated and the lowest-inertia result is kept.
    """
    if n_init > 1 and init is None:
        rng = np.random.default_rng() if rng is None else rng
        runs = [lloyd(X, k, iters, rng) for _ in range(n_init)]
        X = np.asarray(X, dtype=np.float64)
        return min(runs, key=lambda cl: inertia(X, *cl))
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("k-means on empty input")
    if not 1 <= k <= n:
        raise ValueError(f"cannot form {k} clusters from {n} points")
    rng = np.random.default_rng() if rng is None else rng
    centroids = X[dsquared_sample(X, k, rng)].copy() if init is None else np.array(init, dtype=np.float64)
    labels = sq_dists(X, centroids).argmin(1)
    for _ in range(iters):
        labels = _fix_empty(X, centroids, labels, k)
        counts = np.bincount(labels, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, X)
        centroids = sums / counts[:, None]
        new_labels = sq_dists(X, centroids).argmin(1)
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    labels = _fix_empty(X, centroids, labels, k)
    return centroids, labels


def _fix_empty(X, centroids, labels, k):
    counts = np.bincount(labels, minlength=k)
    if counts.min() > 0:
        return labels
    labels = labels.copy()
    for c in np.flatnonzero(counts == 0):
        counts = np.bincount(labels, minlength=k)
        resid = ((X - centroids[labels]) ** 2).sum(1)
        # never strip the last point out of a cluster
        resid[counts[labels] <= 1] = -1.0
        far = int(resid.argmax())
        labels[far] = c
        centroids[c] = X[far]
    return labels


def hierarchical_kmeans(X: np.ndarray, n_leaves: int, branching: int = 2, iters: int = 10,
                        rng: np.random.Generator | None = None, n_init: int = 3) -> np.ndarray:
    """Leaf labels (``0..n_leaves-1``) of a recursive ``branching``-way k-means tree.

    Levels are split breadth-first, largest cluster first, until the leaf count
    reaches ``n_leaves``. Each split keeps the best of ``n_init`` seedings,
    since a bad top-level split cannot be repaired further down.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    if n == 0:
        raise ValueError("k-means on empty input")
    if not 1 <= n_leaves <= n:
        raise ValueError(f"cannot form {n_leaves} leaves from {n} points")
    if branching < 2:
        raise ValueError("branching must be at least 2")
    rng = np.random.default_rng() if rng is None else rng
    leaves = [np.arange(n)]
    while len(leaves) < n_leaves:
        next_level = []
        order = sorted(range(len(leaves)), key=lambda i: (-leaves[i].size, i))
        split = set()
        count = len(leaves)
        for i in order:
            if count >= n_leaves:
                break
            if leaves[i].size < 2:
                continue
            b = min(branching, leaves[i].size, n_leaves - count + 1)
            split.add((i, b))
            count += b - 1
        if not split:
            break
        split_b = dict(split)
        for i, idx in enumerate(leaves):
            if i in split_b:
                _, lab = lloyd(X[idx], split_b[i], iters, rng, n_init=n_init)
                next_level.extend(idx[lab == c] for c in range(split_b[i]))
            else:
                next_level.append(idx)
        leaves = next_level
    labels = np.empty(n, dtype=np.int64)
    for c, idx in enumerate(leaves):
        labels[idx] = c
    return labels
