from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

LOGGER = logging.getLogger(__name__)


class ClusteringError(ValueError):
    pass


@dataclass(frozen=True)
class ClusterResult:
    assignments: np.ndarray
    centers: np.ndarray
    within_cluster_sse: float

    @property
    def k(self) -> int:
        return int(self.centers.shape[0])

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignments == cluster)


def _random_partition(rng: np.random.Generator, p: int, k: int) -> np.ndarray:
    # Every cluster gets at least one point.
    labels = np.concatenate([np.arange(k), rng.integers(0, k, size=p - k)])
    return rng.permutation(labels)


def _centers(points: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    return np.vstack([points[labels == cluster].mean(axis=0) for cluster in range(k)])


def _repair_empty(points: np.ndarray, labels: np.ndarray, centers: np.ndarray, k: int) -> np.ndarray:
    labels = labels.copy()
    for cluster in range(k):
        if np.any(labels == cluster):
            continue
        sizes = np.bincount(labels, minlength=k)
        distances = np.linalg.norm(points - centers[labels], axis=1)
        # Only points whose cluster can spare them are candidates.
        distances[sizes[labels] <= 1] = -np.inf
        farthest = int(np.argmax(distances))
        labels[farthest] = cluster
        centers[cluster] = points[farthest]
    return labels


def _sse(points: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    return float(np.sum((points - centers[labels]) ** 2))


def _lloyd(points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int) -> ClusterResult:
    labels = _random_partition(rng, points.shape[0], k)
    centers = _centers(points, labels, k)

    for _ in range(max_iter):
        distances = cdist(points, centers, metric="sqeuclidean")
        new_labels = np.argmin(distances, axis=1)
        new_labels = _repair_empty(points, new_labels, centers, k)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centers = _centers(points, labels, k)

    return ClusterResult(assignments=labels, centers=centers, within_cluster_sse=_sse(points, labels, centers))


def kmeans(points: np.ndarray, k: int, *, seed: int = 0, restarts: int = 10, max_iter: int = 100) -> ClusterResult:
    data = np.asarray(points, dtype=float)
    if data.ndim != 2:
        raise ClusteringError("points must be a 2-D matrix")
    if k < 1:
        raise ClusteringError("k must be >= 1")
    if data.shape[0] < k:
        raise ClusteringError(f"cannot form {k} clusters from {data.shape[0]} points")

    rng = np.random.default_rng(seed)
    best: ClusterResult | None = None
    for restart in range(max(1, restarts)):
        candidate = _lloyd(data, k, rng, max_iter)
        LOGGER.debug("k-means restart %s: sse=%s", restart, candidate.within_cluster_sse)
        if best is None or candidate.within_cluster_sse < best.within_cluster_sse:
            best = candidate

    assert best is not None
    return best
