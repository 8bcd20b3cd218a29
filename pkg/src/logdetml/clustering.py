"""Seeded k-means (plain and kernelized) plus cluster/label matching.

Both variants use farthest-point initialization: the first center is a
random point, each further center the point with the largest distance to
the centers chosen so far.  Empty clusters are reseeded at the point
farthest from its assigned center.  Lloyd iterations stop on an unchanged
assignment or after ``max_iters`` passes.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidArgumentError
from .linalg import pairwise_sq_dists


def _farthest_point_init(D_to_point, n: int, k: int, rng) -> list[int]:
    """Greedy seeding from pairwise distances; D_to_point(i) gives squared
    distances of all points to point i."""
    first = int(rng.integers(n))
    chosen = [first]
    min_d = D_to_point(first)
    for _ in range(k - 1):
        nxt = int(np.argmax(min_d))
        chosen.append(nxt)
        min_d = np.minimum(min_d, D_to_point(nxt))
    return chosen


def kmeans(X: np.ndarray, k: int, seed: int = 0, max_iters: int = 50):
    """Cluster the columns of X into k groups; returns (labels, centers)."""
    X = np.asarray(X, dtype=float)
    d, n = X.shape
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    idx = _farthest_point_init(lambda i: pairwise_sq_dists(X, X[:, [i]]).ravel(), n, k, rng)
    centers = X[:, idx].copy()
    labels = np.full(n, -1)
    for _ in range(max_iters):
        D = pairwise_sq_dists(X, centers)
        new_labels = np.argmin(D, axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                # reseed the empty cluster at the point farthest from its center
                far = int(np.argmax(np.min(D, axis=1)))
                new_labels[far] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            centers[:, c] = X[:, labels == c].mean(axis=1)
    return labels, centers


def kernel_kmeans(K: np.ndarray, k: int, seed: int = 0, max_iters: int = 50):
    """k-means in the feature space of a Gram matrix K; returns labels.

    Distances to a cluster mean use the kernel expansion
    K[i,i] - 2 mean_j K[i,j] + mean_{j,l} K[j,l] over cluster members.
    """
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    if not 1 <= k <= n:
        raise InvalidArgumentError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    diag = np.diag(K).copy()

    def dist_to_point(i):
        return np.clip(diag + diag[i] - 2.0 * K[:, i], 0.0, None)

    seeds = _farthest_point_init(dist_to_point, n, k, rng)
    labels = np.full(n, -1)
    # initial assignment: nearest seed point in kernel distance
    D0 = np.stack([dist_to_point(s) for s in seeds], axis=1)
    labels = np.argmin(D0, axis=1)
    for c in range(k):
        if not np.any(labels == c):
            labels[seeds[c]] = c
    for _ in range(max_iters):
        D = np.empty((n, k))
        for c in range(k):
            members = labels == c
            mcount = int(np.sum(members))
            mean_col = K[:, members].mean(axis=1)
            mean_all = float(K[np.ix_(members, members)].sum()) / (mcount * mcount)
            D[:, c] = diag - 2.0 * mean_col + mean_all
        new_labels = np.argmin(D, axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                far = int(np.argmax(np.min(D, axis=1)))
                new_labels[far] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels


def matching_error(pred, truth) -> float:
    """Clustering error 1 - accuracy under the best cluster-to-class matching
    (Hungarian assignment on the confusion matrix); permutation invariant."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.size == 0:
        raise InvalidArgumentError("prediction/truth size mismatch or empty")
    pred_ids = {v: t for t, v in enumerate(sorted(set(pred.tolist())))}
    true_ids = {v: t for t, v in enumerate(sorted(set(truth.tolist())))}
    C = np.zeros((len(pred_ids), len(true_ids)))
    for p, t in zip(pred, truth):
        C[pred_ids[p], true_ids[t]] += 1
    rows, cols = linear_sum_assignment(-C)
    return 1.0 - float(C[rows, cols].sum()) / pred.size
