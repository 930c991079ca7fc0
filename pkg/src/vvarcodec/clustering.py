"""Weighted k-means over deduplicated vectors.

Choices fixed for reproducibility:

* initial centroids: k distinct vectors drawn without replacement with
  probability proportional to weight, using numpy's PCG64 generator;
* nearest centroid by squared Euclidean distance, ties to the lowest index;
* an empty cluster takes the vector farthest from its current centroid
  (among clusters that keep at least one other vector);
* centroid sums accumulate in vector-index order.

Distances are summed coordinate by coordinate in a fixed order, so the
parallel assignment kernel returns bit-identical results to the sequential one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

DEFAULT_MAX_ITER = 100


@dataclass(frozen=True, eq=False)
class VectorSet:
    vectors: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        vecs = np.asarray(self.vectors, dtype=np.float64)
        if vecs.ndim == 1:
            vecs = vecs[:, None]
        if vecs.ndim != 2:
            raise ValueError(f"vectors must be 2-d, got shape {vecs.shape}")
        object.__setattr__(self, "vectors", vecs)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (vecs.shape[0],):
                raise ValueError("one weight per vector required")
            if np.any(w <= 0):
                raise ValueError("weights must be positive")
            object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def effective_weights(self) -> np.ndarray:
        return np.ones(len(self)) if self.weights is None else self.weights


@dataclass(frozen=True, eq=False)
class Clustering:
    """Result of :func:`kmeans`.

    ``centroids`` has one row per cluster. When the input has fewer distinct
    vectors than requested clusters there are only as many centroids as
    distinct vectors.
    """

    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int = 0
    history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Clustering):
            return NotImplemented
        return (
            np.array_equal(self.assignments, other.assignments)
            and np.array_equal(self.centroids, other.centroids)
            and self.inertia == other.inertia
            and self.iterations == other.iterations
            and self.history == other.history
        )


def _unique_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """First-occurrence indices of distinct rows and the inverse map."""
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    # +0.0 folds -0.0 into 0.0 so equal values hash equally
    keys = np.ascontiguousarray(x + 0.0).view(np.dtype((np.void, x.dtype.itemsize * x.shape[1]))).ravel()
    _, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return first[order], rank[inverse.ravel()]


def dedupe(vs: VectorSet) -> tuple[VectorSet, np.ndarray]:
    """Collapse equal vectors, summing weights; first-occurrence order is kept.

    Returns the distinct set and, for every input vector, its index in it.
    """
    first, inverse = _unique_rows(vs.vectors)
    weights = np.zeros(first.size)
    np.add.at(weights, inverse, vs.effective_weights)
    return VectorSet(vs.vectors[first], weights), inverse


@numba.njit(cache=True)
def _nearest_row(x, centroids):
    best = 0
    best_d = np.inf
    for c in range(centroids.shape[0]):
        d = 0.0
        for t in range(x.shape[0]):
            diff = x[t] - centroids[c, t]
            d += diff * diff
        if d < best_d:
            best_d = d
            best = c
    return best, best_d


@numba.njit(cache=True)
def _assign_seq(x, centroids, labels, dists):
    for i in range(x.shape[0]):
        labels[i], dists[i] = _nearest_row(x[i], centroids)


@numba.njit(cache=True, parallel=True)
def _assign_par(x, centroids, labels, dists):
    for i in numba.prange(x.shape[0]):
        labels[i], dists[i] = _nearest_row(x[i], centroids)


def _assign(x, centroids, parallel=False):
    labels = np.empty(x.shape[0], dtype=np.int64)
    dists = np.empty(x.shape[0], dtype=np.float64)
    (_assign_par if parallel else _assign_seq)(x, centroids, labels, dists)
    return labels, dists


def nearest_centroid(vector, centroids) -> int:
    """Index of the closest centroid; ties go to the lowest index."""
    x = np.asarray(vector, dtype=np.float64).ravel()
    c = np.asarray(centroids, dtype=np.float64)
    if c.ndim == 1:
        c = c[:, None]
    if c.shape[0] == 0:
        raise ValueError("no centroids")
    if c.shape[1] != x.size:
        raise ValueError(f"vector of dim {x.size} against centroids of dim {c.shape[1]}")
    return int(_nearest_row(x, c)[0])


def _weighted_means(x, w, labels, k):
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x * w[:, None])
    mass = np.bincount(labels, weights=w, minlength=k)
    return sums / mass[:, None]


def _inertia(x, w, labels, centroids) -> float:
    diff = x - centroids[labels]
    return float(np.dot(w, np.einsum("ij,ij->i", diff, diff)))


def _refill_empty(labels, dists, k):
    counts = np.bincount(labels, minlength=k)
    dists = dists.copy()
    for c in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        cand = np.where(movable, dists, -1.0)
        i = int(np.argmax(cand))
        counts[labels[i]] -= 1
        counts[c] += 1
        labels[i] = c
        dists[i] = 0.0
    return labels


def kmeans(
    vs: VectorSet,
    k: int,
    seed: int | np.random.SeedSequence | None = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    parallel: bool = False,
) -> Clustering:
    """Lloyd's algorithm on the weighted, deduplicated form of ``vs``.

    ``history`` records the inertia after each iteration's centroid update.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(vs) == 0:
        raise ValueError("cannot cluster an empty vector set")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")

    distinct, inverse = dedupe(vs)
    x, w = distinct.vectors, distinct.weights
    n = x.shape[0]
    if n <= k:
        return Clustering(inverse, x.copy(), 0.0, 0, [0.0])

    rng = np.random.default_rng(seed)
    init = rng.choice(n, size=k, replace=False, p=w / w.sum())
    centroids = x[np.sort(init)]
    labels = None
    history = []
    it = 0
    for it in range(1, max_iter + 1):
        new_labels, dists = _assign(x, centroids, parallel)
        new_labels = _refill_empty(new_labels, dists, k)
        centroids = _weighted_means(x, w, new_labels, k)
        history.append(_inertia(x, w, new_labels, centroids))
        stable = labels is not None and np.array_equal(labels, new_labels)
        labels = new_labels
        if stable:
            break
    return Clustering(labels[inverse], centroids, history[-1], it, history)
