"""Lloyd's k-means over scalar pixel intensities.

Centroids are initialized greedily from the distinct intensity values: the
first pair is the two values at maximum distance (the minimum and maximum),
and each further pick maximizes the minimum distance to the centroids chosen
so far. Ties go to the smaller intensity. Clustering itself alternates
nearest-centroid assignment (squared Euclidean on the scalar intensity,
ties to the lower centroid index) with recomputing centroids as cluster
means, until the largest centroid movement drops to ``tol`` or ``max_iter``
is reached. The algorithm is fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError
from .model import GrayImage, LabelMap


@dataclass(frozen=True)
class KmeansConfig:
    k: int = 2
    max_iter: int = 100
    tol: float = 1e-6

    def __post_init__(self):
        if self.k < 1:
            raise ConfigError("k must be at least 1")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        if not (np.isfinite(self.tol) and self.tol >= 0):
            raise ConfigError("tol must be a non-negative number")


@dataclass(frozen=True, eq=False)
class KmeansResult:
    """Labels, centroids and the objective value after each assignment step.

    The objective is the within-cluster sum of squared distances; Lloyd
    iterations never increase it, so ``objective_trace`` is non-increasing.
    """

    labels: LabelMap
    centroids: np.ndarray
    objective_trace: np.ndarray

    def __post_init__(self):
        centroids = np.asarray(self.centroids, dtype=np.float64)
        if centroids.ndim != 1 or centroids.size != self.labels.k:
            raise ValueError("centroids must be a 1D array of length k")
        if centroids.min() < 0.0 or centroids.max() > 1.0:
            raise ValueError("centroids must lie in [0, 1]")
        trace = np.asarray(self.objective_trace, dtype=np.float64)
        centroids.setflags(write=False)
        trace.setflags(write=False)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "objective_trace", trace)


def init_centroids_farthest(img: GrayImage, k: int) -> np.ndarray:
    """Greedy farthest-value initialization over distinct intensities."""
    if k < 1:
        raise ConfigError("k must be at least 1")
    values = np.unique(img.pixels)
    if values.size < k:
        raise DegenerateInputError(
            f"image has {values.size} distinct intensities, fewer than k={k}"
        )
    if k == 1:
        return values[:1].copy()
    chosen = [float(values[0]), float(values[-1])]
    min_dist = np.minimum(np.abs(values - chosen[0]), np.abs(values - chosen[1]))
    while len(chosen) < k:
        pick = int(np.argmax(min_dist))  # first occurrence = smallest value on ties
        chosen.append(float(values[pick]))
        min_dist = np.minimum(min_dist, np.abs(values - values[pick]))
    return np.array(chosen)


def _assign(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return np.argmin((x[:, None] - centroids[None, :]) ** 2, axis=1)


def _sse(x: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> float:
    return float(np.sum((x - centroids[labels]) ** 2))


def _cluster_means(x: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    counts = np.bincount(labels, minlength=k)
    sums = np.bincount(labels, weights=x, minlength=k)
    return sums / counts


def _fill_empty_clusters(
    x: np.ndarray, labels: np.ndarray, centroids: np.ndarray, k: int
) -> tuple[np.ndarray, np.ndarray]:
    # Re-seed each empty cluster at the pixel farthest from its assigned
    # centroid, then reassign. Every re-seed strictly decreases the SSE, so
    # this terminates with all k clusters populated.
    for _ in range(x.size):
        counts = np.bincount(labels, minlength=k)
        empty = np.flatnonzero(counts == 0)
        if empty.size == 0:
            return labels, centroids
        dist = (x - centroids[labels]) ** 2
        centroids = centroids.copy()
        for cluster in empty:
            farthest = int(np.argmax(dist))
            centroids[cluster] = x[farthest]
            dist[farthest] = -1.0
        labels = _assign(x, centroids)
    raise DegenerateInputError("unable to populate all clusters")  # pragma: no cover


def kmeans_cluster(
    img: GrayImage, cfg: KmeansConfig = KmeansConfig(), init_centroids: np.ndarray | None = None
) -> KmeansResult:
    """Cluster pixel intensities with Lloyd iterations.

    ``init_centroids`` overrides the farthest-value initialization, which
    makes converged results verifiable as fixed points.
    """
    x = img.pixels.ravel()
    if np.unique(x).size < cfg.k:
        raise DegenerateInputError(
            f"image has fewer than k={cfg.k} distinct intensities"
        )
    if init_centroids is None:
        centroids = init_centroids_farthest(img, cfg.k)
    else:
        centroids = np.asarray(init_centroids, dtype=np.float64).copy()
        if centroids.shape != (cfg.k,):
            raise ConfigError("init_centroids must have shape (k,)")

    labels = _assign(x, centroids)
    labels, centroids = _fill_empty_clusters(x, labels, centroids, cfg.k)
    trace = [_sse(x, labels, centroids)]
    for _ in range(cfg.max_iter):
        new_centroids = _cluster_means(x, labels, cfg.k)
        moved = float(np.max(np.abs(new_centroids - centroids)))
        centroids = new_centroids
        labels = _assign(x, centroids)
        labels, centroids = _fill_empty_clusters(x, labels, centroids, cfg.k)
        trace.append(_sse(x, labels, centroids))
        if moved <= cfg.tol:
            break
    return KmeansResult(
        labels=LabelMap(labels.reshape(img.pixels.shape), cfg.k),
        centroids=centroids,
        objective_trace=np.array(trace),
    )
