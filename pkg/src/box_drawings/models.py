from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

UNITS_ORIGINAL = "original"
UNITS_NORMALIZED = "normalized"
ALLOWED_UNITS = {UNITS_ORIGINAL, UNITS_NORMALIZED}

NEGATIVES_MAJORITY_ONLY = "majority_only"
NEGATIVES_ALL_OUT_OF_CLUSTER = "all_out_of_cluster"


class DatasetError(ValueError):
    pass


def _frozen_array(values, dtype) -> np.ndarray:
    array = np.array(values, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    units: str = UNITS_ORIGINAL

    def __post_init__(self) -> None:
        names = tuple(str(name) for name in self.feature_names)
        features = np.asarray(self.features, dtype=float)
        if features.size == 0:
            features = features.reshape(0, len(names))
        if features.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        if features.shape[1] != len(names):
            raise DatasetError(
                f"features have {features.shape[1]} columns but {len(names)} feature names were given"
            )
        if not np.all(np.isfinite(features)):
            row, col = np.argwhere(~np.isfinite(features))[0]
            raise DatasetError(f"Non-finite value at row {row}, feature {names[col]}")

        labels = np.asarray(self.labels).reshape(-1)
        if labels.shape[0] != features.shape[0]:
            raise DatasetError(f"{features.shape[0]} rows but {labels.shape[0]} labels")
        if labels.size and not np.all(np.isin(labels, (-1, 1))):
            raise DatasetError("labels must be -1 or +1")
        if self.units not in ALLOWED_UNITS:
            raise DatasetError(f"units must be one of {sorted(ALLOWED_UNITS)}")

        object.__setattr__(self, "features", _frozen_array(features, float))
        object.__setattr__(self, "labels", _frozen_array(labels, np.int64))
        object.__setattr__(self, "feature_names", names)

    @property
    def m(self) -> int:
        return int(self.features.shape[0])

    @property
    def n(self) -> int:
        return int(self.features.shape[1])

    @property
    def positive_mask(self) -> np.ndarray:
        return self.labels == 1

    @property
    def negative_mask(self) -> np.ndarray:
        return self.labels == -1

    @property
    def positive_count(self) -> int:
        return int(np.count_nonzero(self.positive_mask))

    @property
    def negative_count(self) -> int:
        return int(np.count_nonzero(self.negative_mask))

    def subset(self, indices: Sequence[int] | np.ndarray) -> Dataset:
        index = np.asarray(indices, dtype=np.int64)
        return Dataset(
            features=self.features[index],
            labels=self.labels[index],
            feature_names=self.feature_names,
            units=self.units,
        )

    def require_trainable(self) -> None:
        if self.positive_count == 0 or self.negative_count == 0:
            raise DatasetError(
                "training data needs at least one positive and one negative example "
                f"(got {self.positive_count} positive, {self.negative_count} negative)"
            )

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.features).tobytes())
        digest.update(np.ascontiguousarray(self.labels).tobytes())
        digest.update("|".join(self.feature_names).encode("utf-8"))
        return digest.hexdigest()


@dataclass(frozen=True)
class NormParams:
    minimum: tuple[float, ...]
    maximum: tuple[float, ...]

    def __post_init__(self) -> None:
        minimum = tuple(float(v) for v in self.minimum)
        maximum = tuple(float(v) for v in self.maximum)
        if len(minimum) != len(maximum):
            raise DatasetError("normalization min/max lengths differ")
        for j, (low, high) in enumerate(zip(minimum, maximum)):
            if not (math.isfinite(low) and math.isfinite(high)) or low > high:
                raise DatasetError(f"invalid normalization range for feature {j}: [{low}, {high}]")
        object.__setattr__(self, "minimum", minimum)
        object.__setattr__(self, "maximum", maximum)

    @property
    def n(self) -> int:
        return len(self.minimum)


@dataclass(frozen=True)
class AxisBox:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self) -> None:
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        if len(lower) != len(upper):
            raise DatasetError("box lower/upper lengths differ")
        for j, (low, high) in enumerate(zip(lower, upper)):
            if math.isnan(low) or math.isnan(high) or low > high:
                raise DatasetError(f"box boundary {j} is degenerate: lower {low} > upper {high}")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def n(self) -> int:
        return len(self.lower)


@dataclass(frozen=True)
class BoxModel:
    boxes: tuple[AxisBox, ...]
    feature_names: tuple[str, ...]
    units: str = UNITS_ORIGINAL
    norm: NormParams | None = None

    def __post_init__(self) -> None:
        names = tuple(str(name) for name in self.feature_names)
        boxes = tuple(self.boxes)
        if self.units not in ALLOWED_UNITS:
            raise DatasetError(f"units must be one of {sorted(ALLOWED_UNITS)}")
        for box in boxes:
            if box.n != len(names):
                raise DatasetError(f"box has {box.n} dimensions but model has {len(names)} features")
        if self.norm is not None and self.norm.n != len(names):
            raise DatasetError("normalization dimension does not match the feature count")
        object.__setattr__(self, "boxes", boxes)
        object.__setattr__(self, "feature_names", names)

    @property
    def k(self) -> int:
        return len(self.boxes)


@dataclass(frozen=True)
class FastBoxesConfig:
    k: int = 1
    c: float = 1.0
    beta: float = 0.0
    epsilon_expand: float = 1e-3
    r_minus_threshold: float = 1e-8
    kmeans_seed: int = 0
    kmeans_restarts: int = 10
    kmeans_max_iter: int = 100
    negatives_for_discrimination: str = NEGATIVES_MAJORITY_ONLY
    final_expansion: bool = True


@dataclass(frozen=True)
class ExactBoxesConfig:
    k: int = 1
    c_i: float = 1.0
    c_e: float = 0.0
    margin: float = 1e-4
    big_m: float = 4.0
    eps_strict: float = 1e-6


@dataclass(frozen=True)
class GridSearchSpace:
    k_values: tuple[int, ...] = (1, 2, 3, 4, 5)
    beta_values: tuple[float, ...] = (0.0, 0.01, 0.1, 0.5, 1.0)

    def points(self) -> list[tuple[int, float]]:
        return [(k, beta) for k in self.k_values for beta in self.beta_values]
