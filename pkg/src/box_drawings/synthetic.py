from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from box_drawings.models import Dataset

LOGGER = logging.getLogger(__name__)

FEATURE_NAMES = ("x1", "x2")
BATCH_SIZE = 4096


class UnknownShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Shape:
    """Positive region: a membership test plus the box positives are drawn from."""

    contains: Callable[[np.ndarray], np.ndarray]
    lower: tuple[float, float]
    upper: tuple[float, float]
    # Negatives may fall inside the region.
    overlapping: bool = False


def _in_box(points: np.ndarray, lower: tuple[float, float], upper: tuple[float, float]) -> np.ndarray:
    return np.all((points >= lower) & (points <= upper), axis=1)


def _castle(points: np.ndarray) -> np.ndarray:
    return _in_box(points, (-0.5, -0.5), (0.5, 0.0)) | _in_box(points, (-0.2, 0.0), (0.2, 0.4))


SHAPES: dict[str, Shape] = {
    "square": Shape(lambda p: _in_box(p, (-0.3, -0.3), (0.3, 0.3)), (-0.3, -0.3), (0.3, 0.3)),
    "corner": Shape(lambda p: _in_box(p, (0.6, 0.6), (1.0, 1.0)), (0.6, 0.6), (1.0, 1.0)),
    "diamond": Shape(lambda p: np.abs(p).sum(axis=1) <= 0.4, (-0.4, -0.4), (0.4, 0.4)),
    "castle": Shape(_castle, (-0.5, -0.5), (0.5, 0.4)),
    "flooded": Shape(lambda p: _in_box(p, (-0.4, -0.4), (0.4, 0.4)), (-0.4, -0.4), (0.4, 0.4), overlapping=True),
}
SHAPE_ALIASES = {"castle-like": "castle"}


def shape_names() -> list[str]:
    return sorted(set(SHAPES) | set(SHAPE_ALIASES))


def _resolve_shape(name: str) -> Shape:
    key = name.strip().lower()
    key = SHAPE_ALIASES.get(key, key)
    if key not in SHAPES:
        raise UnknownShapeError(f"Unknown shape: {name} (choose from {', '.join(shape_names())})")
    return SHAPES[key]


def _sample(
    rng: np.random.Generator,
    count: int,
    lower: tuple[float, float],
    upper: tuple[float, float],
    accept: Callable[[np.ndarray], np.ndarray],
) -> np.ndarray:
    kept: list[np.ndarray] = []
    remaining = count
    while remaining > 0:
        batch = rng.uniform(lower, upper, size=(max(BATCH_SIZE, remaining), 2))
        batch = batch[accept(batch)][:remaining]
        kept.append(batch)
        remaining -= batch.shape[0]
    if not kept:
        return np.empty((0, 2))
    return np.vstack(kept)


def positive_count(m: int, imbalance_ratio: float) -> int:
    return int(round(m / (1.0 + imbalance_ratio)))


def generate_synthetic(shape: str, m: int, imbalance_ratio: float, seed: int) -> Dataset:
    region = _resolve_shape(shape)
    if m < 10:
        raise ValueError("m must be >= 10")
    if imbalance_ratio < 1.0:
        raise ValueError("imbalance ratio must be >= 1")

    positives = positive_count(m, imbalance_ratio)
    negatives = m - positives
    rng = np.random.default_rng(seed)

    positive_points = _sample(rng, positives, region.lower, region.upper, region.contains)
    if region.overlapping:
        negative_points = _sample(rng, negatives, (-1.0, -1.0), (1.0, 1.0), lambda p: np.ones(len(p), dtype=bool))
    else:
        negative_points = _sample(rng, negatives, (-1.0, -1.0), (1.0, 1.0), lambda p: ~region.contains(p))

    features = np.vstack([positive_points, negative_points])
    labels = np.concatenate([np.ones(positives, dtype=np.int64), -np.ones(negatives, dtype=np.int64)])
    order = rng.permutation(m)
    LOGGER.info("generated %s: %s positives, %s negatives", shape, positives, negatives)
    return Dataset(features=features[order], labels=labels[order], feature_names=FEATURE_NAMES)
