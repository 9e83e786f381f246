from __future__ import annotations

import math

import numpy as np

from box_drawings.models import (
    UNITS_NORMALIZED,
    UNITS_ORIGINAL,
    AxisBox,
    BoxModel,
    Dataset,
    DatasetError,
    NormParams,
)

NORMALIZED_TOLERANCE = 1e-9


def fit_norm_params(features: np.ndarray) -> NormParams:
    if features.shape[0] == 0:
        raise DatasetError("cannot normalize an empty dataset")
    if not np.all(np.isfinite(features)):
        raise DatasetError("cannot normalize non-finite values")
    return NormParams(minimum=features.min(axis=0), maximum=features.max(axis=0))


def apply_normalization(features: np.ndarray, params: NormParams) -> np.ndarray:
    values = np.asarray(features, dtype=float)
    if values.shape[-1] != params.n:
        raise DatasetError(f"expected {params.n} features, got {values.shape[-1]}")
    if not np.all(np.isfinite(values)):
        raise DatasetError("cannot normalize non-finite values")

    low = np.asarray(params.minimum)
    high = np.asarray(params.maximum)
    span = high - low
    constant = span == 0
    safe_span = np.where(constant, 1.0, span)
    scaled = 2.0 * (values - low) / safe_span - 1.0
    return np.where(constant, 0.0, scaled)


def normalize(data: Dataset) -> tuple[Dataset, NormParams]:
    params = fit_norm_params(data.features)
    normalized = Dataset(
        features=apply_normalization(data.features, params),
        labels=data.labels,
        feature_names=data.feature_names,
        units=UNITS_NORMALIZED,
    )
    return normalized, params


def require_normalized(data: Dataset) -> None:
    if data.m and np.max(np.abs(data.features)) > 1.0 + NORMALIZED_TOLERANCE:
        raise DatasetError("data must be normalized to [-1, 1] first")


def _to_original(value: float, low: float, high: float, *, is_lower: bool) -> float:
    if math.isinf(value):
        return value
    if low == high:
        # The constant sits at 0 after normalization. A side that admits it
        # disappears; a side that excludes it stays just off the constant.
        if is_lower:
            return -math.inf if value <= 0.0 else low + value
        return math.inf if value >= 0.0 else low + value
    return low + (value + 1.0) * (high - low) / 2.0


def _to_normalized(value: float, low: float, high: float) -> float:
    if math.isinf(value):
        return value
    if low == high:
        return value - low
    return 2.0 * (value - low) / (high - low) - 1.0


def _check_dimension(model: BoxModel, params: NormParams) -> None:
    if params.n != len(model.feature_names):
        raise DatasetError(
            f"normalization has {params.n} features but model has {len(model.feature_names)}"
        )


def denormalize_model(model: BoxModel, params: NormParams) -> BoxModel:
    if model.units != UNITS_NORMALIZED:
        raise DatasetError("model is already in original units")
    _check_dimension(model, params)

    boxes: list[AxisBox] = []
    for box in model.boxes:
        lower = [
            _to_original(value, low, high, is_lower=True)
            for value, low, high in zip(box.lower, params.minimum, params.maximum)
        ]
        upper = [
            _to_original(value, low, high, is_lower=False)
            for value, low, high in zip(box.upper, params.minimum, params.maximum)
        ]
        boxes.append(AxisBox(lower=lower, upper=upper))

    return BoxModel(boxes=tuple(boxes), feature_names=model.feature_names, units=UNITS_ORIGINAL, norm=params)


def normalize_model(model: BoxModel, params: NormParams) -> BoxModel:
    if model.units != UNITS_ORIGINAL:
        raise DatasetError("model is already in normalized units")
    _check_dimension(model, params)

    boxes = tuple(
        AxisBox(
            lower=[_to_normalized(v, low, high) for v, low, high in zip(box.lower, params.minimum, params.maximum)],
            upper=[_to_normalized(v, low, high) for v, low, high in zip(box.upper, params.minimum, params.maximum)],
        )
        for box in model.boxes
    )
    return BoxModel(boxes=boxes, feature_names=model.feature_names, units=UNITS_NORMALIZED, norm=params)
