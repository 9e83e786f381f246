from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from box_drawings.models import UNITS_NORMALIZED, AxisBox, BoxModel, Dataset, DatasetError

ALWAYS_NEGATIVE_TEXT = "always predict negative"


def _check_width(model: BoxModel, width: int) -> None:
    if width != len(model.feature_names):
        raise DatasetError(f"expected {len(model.feature_names)} features, got {width}")


def check_units(model: BoxModel, data: Dataset) -> None:
    _check_width(model, data.n)
    if model.units != data.units:
        raise DatasetError(f"unit mismatch: model is {model.units}, data is {data.units}")


def contains(box: AxisBox, x: Sequence[float]) -> bool:
    return all(low <= value <= high for low, value, high in zip(box.lower, x, box.upper))


def predict(model: BoxModel, x: Sequence[float]) -> int:
    point = [float(value) for value in x]
    _check_width(model, len(point))
    if any(contains(box, point) for box in model.boxes):
        return 1
    return -1


def box_membership(box: AxisBox, features: np.ndarray) -> np.ndarray:
    lower = np.asarray(box.lower)
    upper = np.asarray(box.upper)
    return np.all((features >= lower) & (features <= upper), axis=1)


def predict_many(model: BoxModel, features: np.ndarray) -> np.ndarray:
    values = np.asarray(features, dtype=float)
    if values.ndim != 2:
        raise DatasetError("features must be a 2-D matrix")
    _check_width(model, values.shape[1])

    covered = np.zeros(values.shape[0], dtype=bool)
    for box in model.boxes:
        covered |= box_membership(box, values)
    return np.where(covered, 1, -1)


def predict_dataset(model: BoxModel, data: Dataset) -> np.ndarray:
    check_units(model, data)
    return predict_many(model, data.features)


def _format_value(value: float) -> str:
    return f"{value:.4f}"


def _describe_feature(name: str, low: float, high: float) -> str | None:
    if math.isinf(low) and math.isinf(high):
        if low < 0 < high:
            return None
        return f"{name} never satisfied"
    if math.isinf(low):
        return f"{name} below {_format_value(high)}"
    if math.isinf(high):
        return f"{name} above {_format_value(low)}"
    return f"{name} between {_format_value(low)} and {_format_value(high)}"


def _constant_is_inside(model: BoxModel, box: AxisBox, j: int) -> bool:
    if model.norm is None or model.norm.minimum[j] != model.norm.maximum[j]:
        return False
    value = 0.0 if model.units == UNITS_NORMALIZED else model.norm.minimum[j]
    return box.lower[j] <= value <= box.upper[j]


def describe_box(model: BoxModel, box: AxisBox) -> str:
    clauses: list[str] = []
    for j, name in enumerate(model.feature_names):
        if _constant_is_inside(model, box, j):
            continue
        clause = _describe_feature(name, box.lower[j], box.upper[j])
        if clause is not None:
            clauses.append(clause)
    if not clauses:
        return "any point"
    return "; ".join(clauses)


def describe(model: BoxModel) -> str:
    if not model.boxes:
        return ALWAYS_NEGATIVE_TEXT
    if len(model.boxes) == 1:
        return describe_box(model, model.boxes[0])
    lines = [f"Box {index}: {describe_box(model, box)}" for index, box in enumerate(model.boxes, start=1)]
    return "\n".join(lines)
