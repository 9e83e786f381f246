import numpy as np
import pytest

from box_drawings.clustering import ClusteringError, kmeans


def test_single_cluster_center_is_mean() -> None:
    points = np.array([[0.0, 0.0], [1.0, 2.0], [2.0, 1.0]])

    result = kmeans(points, 1, seed=3)

    assert result.assignments.tolist() == [0, 0, 0]
    assert result.centers[0] == pytest.approx([1.0, 1.0])


def test_one_cluster_per_point() -> None:
    points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])

    result = kmeans(points, 4, seed=0)

    assert sorted(result.assignments.tolist()) == [0, 1, 2, 3]
    assert result.within_cluster_sse == 0.0


def test_separated_blobs() -> None:
    rng = np.random.default_rng(11)
    left = rng.normal(loc=(-5.0, 0.0), scale=0.3, size=(10, 2))
    right = rng.normal(loc=(5.0, 0.0), scale=0.3, size=(10, 2))

    result = kmeans(np.vstack([left, right]), 2, seed=0)

    assert len(set(result.assignments[:10].tolist())) == 1
    assert len(set(result.assignments[10:].tolist())) == 1
    assert result.assignments[0] != result.assignments[10]


def test_no_empty_clusters_with_duplicates() -> None:
    points = np.array([[0.0], [0.0], [0.0], [1.0]])

    result = kmeans(points, 3, seed=5)

    assert all(result.members(cluster).size > 0 for cluster in range(3))


def test_seed_determinism() -> None:
    points = np.random.default_rng(2).uniform(size=(40, 3))

    first = kmeans(points, 4, seed=9)
    second = kmeans(points, 4, seed=9)

    assert np.array_equal(first.assignments, second.assignments)
    assert first.within_cluster_sse == second.within_cluster_sse


def test_too_many_clusters() -> None:
    with pytest.raises(ClusteringError):
        kmeans(np.zeros((2, 1)), 3)
