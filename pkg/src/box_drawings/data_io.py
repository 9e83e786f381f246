from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from box_drawings.models import AxisBox, BoxModel, Dataset, DatasetError, NormParams

PREDICTION_COLUMN = "prediction"


def write_text_atomic(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    temp_name: str | None = None
    try:
        with tempfile.NamedTemporaryFile(
            mode="w",
            encoding="utf-8",
            dir=path.parent,
            prefix=f".{path.name}.",
            delete=False,
            newline="",
        ) as temp_file:
            temp_name = temp_file.name
            temp_file.write(text)
        os.replace(temp_name, path)
    except BaseException:
        if temp_name is not None:
            Path(temp_name).unlink(missing_ok=True)
        raise


def _read_frame(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset file not found: {path}")
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8", skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise DatasetError(f"Dataset file has no header row: {path}") from exc


def _parse_numeric_columns(frame: pd.DataFrame, columns: list[str]) -> np.ndarray:
    parsed = np.empty((len(frame), len(columns)), dtype=float)
    for col_index, name in enumerate(columns):
        raw = frame[name]
        values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
        bad = ~np.isfinite(values)
        if bad.any():
            row = int(np.argmax(bad))
            # Line 1 is the header.
            raise DatasetError(f"Row {row + 2}, column {name}: cannot parse {raw.iloc[row]!r} as a finite number")
        parsed[:, col_index] = values
    return parsed


def load_csv(path: Path, label_column: str, positive_label: str) -> Dataset:
    frame = _read_frame(path)
    if label_column not in frame.columns:
        raise DatasetError(f"Label column not found: {label_column}")
    if len(frame) == 0:
        raise DatasetError(f"Dataset file has no data rows: {path}")

    feature_names = [str(name) for name in frame.columns if name != label_column]
    features = _parse_numeric_columns(frame, feature_names)
    raw_labels = frame[label_column].str.strip()
    labels = np.where(raw_labels.to_numpy() == positive_label.strip(), 1, -1)
    return Dataset(features=features, labels=labels, feature_names=feature_names)


def load_prediction_input(path: Path, feature_names: tuple[str, ...]) -> tuple[pd.DataFrame, np.ndarray]:
    frame = _read_frame(path)
    for name in feature_names:
        if name not in frame.columns:
            raise DatasetError(f"Feature column not found: {name}")
    return frame, _parse_numeric_columns(frame, list(feature_names))


def render_predictions_csv(frame: pd.DataFrame, predictions: np.ndarray) -> str:
    output = frame.copy()
    output[PREDICTION_COLUMN] = np.asarray(predictions, dtype=np.int64)
    return output.to_csv(index=False, lineterminator="\n")


def write_dataset_csv(
    path: Path,
    data: Dataset,
    *,
    label_column: str = "class",
    positive_label: str = "positive",
    negative_label: str = "negative",
) -> None:
    frame = pd.DataFrame(data.features, columns=list(data.feature_names))
    frame[label_column] = np.where(data.labels == 1, positive_label, negative_label)
    write_text_atomic(path, frame.to_csv(index=False, lineterminator="\n"))


def _bound_to_json(value: float) -> float | None:
    return None if math.isinf(value) else float(value)


def _bound_from_json(value: Any, sentinel: float) -> float:
    return sentinel if value is None else float(value)


def model_to_dict(model: BoxModel) -> dict[str, Any]:
    normalization = None
    if model.norm is not None:
        normalization = {"min": list(model.norm.minimum), "max": list(model.norm.maximum)}
    return {
        "feature_names": list(model.feature_names),
        "units": model.units,
        "normalization": normalization,
        "boxes": [
            {
                "lower": [_bound_to_json(v) for v in box.lower],
                "upper": [_bound_to_json(v) for v in box.upper],
            }
            for box in model.boxes
        ],
    }


def model_from_dict(payload: dict[str, Any]) -> BoxModel:
    try:
        normalization = payload.get("normalization")
        norm = None
        if normalization is not None:
            norm = NormParams(minimum=normalization["min"], maximum=normalization["max"])
        boxes = tuple(
            AxisBox(
                lower=[_bound_from_json(v, -math.inf) for v in box["lower"]],
                upper=[_bound_from_json(v, math.inf) for v in box["upper"]],
            )
            for box in payload["boxes"]
        )
        return BoxModel(
            boxes=boxes,
            feature_names=tuple(payload["feature_names"]),
            units=str(payload.get("units", "original")),
            norm=norm,
        )
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"malformed model JSON: {exc}") from exc


def render_model_json(model: BoxModel) -> str:
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def save_model(path: Path, model: BoxModel) -> None:
    write_text_atomic(path, render_model_json(model))


def load_model(path: Path) -> BoxModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Model file not found: {path}")
    with path.open("r", encoding="utf-8") as file_obj:
        payload = json.load(file_obj)
    if not isinstance(payload, dict):
        raise DatasetError("malformed model JSON: top level must be an object")
    return model_from_dict(payload)
