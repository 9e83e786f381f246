from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import pandas as pd
from sklearn.model_selection import StratifiedKFold

from box_drawings.box_logic import predict_dataset
from box_drawings.data_io import write_text_atomic
from box_drawings.models import BoxModel, Dataset

LOGGER = logging.getLogger(__name__)

Trainer = Callable[[Dataset, float], BoxModel]

DEFAULT_COSTS: tuple[float, ...] = tuple(round(0.1 * step, 1) for step in range(1, 11))
ROC_ANCHORS = ((0.0, 0.0), (1.0, 1.0))
POINT_COLUMNS = ["fold", "cost", "tp", "fp", "tn", "fn"]


class StratificationError(ValueError):
    pass


@dataclass(frozen=True)
class RocPoint:
    tp: int
    fp: int
    tn: int
    fn: int
    cost: float

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn

    @property
    def is_trivial(self) -> bool:
        return self.tp + self.fp == 0 or self.tn + self.fn == 0

    def rates(self) -> tuple[float, float]:
        """(false positive rate, true positive rate)."""
        return self.fp / self.negatives, self.tp / self.positives


@dataclass(frozen=True)
class AuhResult:
    hull_vertices: tuple[tuple[float, float], ...]
    auh: float


@dataclass(frozen=True)
class CvReport:
    fold_auh: tuple[float, ...]
    mean: float
    std: float
    trivial_fraction: float
    points: tuple[tuple[int, RocPoint], ...]
    fold_hulls: tuple[AuhResult, ...]
    pooled_hull: AuhResult


def confusion(model: BoxModel, data: Dataset, cost: float = math.nan) -> RocPoint:
    predictions = predict_dataset(model, data)
    positive = data.positive_mask
    predicted_positive = predictions == 1
    return RocPoint(
        tp=int(np.count_nonzero(positive & predicted_positive)),
        fp=int(np.count_nonzero(~positive & predicted_positive)),
        tn=int(np.count_nonzero(~positive & ~predicted_positive)),
        fn=int(np.count_nonzero(positive & ~predicted_positive)),
        cost=cost,
    )


def is_trivial(model: BoxModel, data: Dataset) -> bool:
    predictions = predict_dataset(model, data)
    return bool(predictions.size == 0 or np.all(predictions == predictions[0]))


def _validate_costs(costs: Sequence[float]) -> tuple[float, ...]:
    values = tuple(float(cost) for cost in costs)
    if not values:
        raise ValueError("costs must not be empty")
    for cost in values:
        if not 0.0 < cost <= 1.0:
            raise ValueError(f"cost {cost} is outside (0, 1]")
    return values


def cost_sweep(
    trainer: Trainer,
    data_train: Dataset,
    data_test: Dataset,
    costs: Sequence[float] = DEFAULT_COSTS,
) -> list[RocPoint]:
    points: list[RocPoint] = []
    for cost in _validate_costs(costs):
        model = trainer(data_train, cost)
        points.append(confusion(model, data_test, cost))
    return points


def _cross(origin: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> float:
    return (a[0] - origin[0]) * (b[1] - origin[1]) - (a[1] - origin[1]) * (b[0] - origin[0])


def upper_hull(points: Iterable[tuple[float, float]]) -> list[tuple[float, float]]:
    """Upper convex hull in ROC space, anchors (0, 0) and (1, 1) included."""
    ordered = sorted(set(points) | set(ROC_ANCHORS))
    hull: list[tuple[float, float]] = []
    for point in ordered:
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], point) >= 0:
            hull.pop()
        hull.append(point)
    return hull


def hull_area(vertices: Sequence[tuple[float, float]]) -> float:
    return math.fsum(
        (right[0] - left[0]) * (left[1] + right[1]) / 2.0 for left, right in zip(vertices, vertices[1:])
    )


def auh_from_rates(rates: Iterable[tuple[float, float]]) -> AuhResult:
    vertices = upper_hull(rates)
    return AuhResult(hull_vertices=tuple(vertices), auh=hull_area(vertices))


def convex_hull_auh(points: Sequence[RocPoint], positives: int, negatives: int) -> AuhResult:
    if positives < 1 or negatives < 1:
        raise ValueError("AUH needs at least one positive and one negative example")
    return auh_from_rates((point.fp / negatives, point.tp / positives) for point in points)


def stratified_kfold(data: Dataset, folds: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    if folds < 2:
        raise StratificationError("folds must be >= 2")
    if data.positive_count < folds or data.negative_count < folds:
        raise StratificationError(
            f"cannot stratify {data.positive_count} positives and {data.negative_count} negatives "
            f"into {folds} folds"
        )

    splitter = StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed)
    placeholder = np.zeros((data.m, 1))
    return [
        (np.sort(train_index), np.sort(test_index))
        for train_index, test_index in splitter.split(placeholder, data.labels)
    ]


def evaluate_cv(
    data: Dataset,
    trainer: Trainer,
    costs: Sequence[float] = DEFAULT_COSTS,
    folds: int = 10,
    seed: int = 0,
    *,
    max_workers: int = 1,
) -> CvReport:
    cost_values = _validate_costs(costs)
    splits = stratified_kfold(data, folds, seed)
    partitions = [(data.subset(train_index), data.subset(test_index)) for train_index, test_index in splits]
    jobs = [(fold, cost) for fold in range(len(partitions)) for cost in cost_values]

    def run(job: tuple[int, float]) -> RocPoint:
        fold, cost = job
        train, test = partitions[fold]
        return confusion(trainer(train, cost), test, cost)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = list(executor.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    by_fold: list[list[RocPoint]] = [[] for _ in partitions]
    for (fold, _), point in zip(jobs, results):
        by_fold[fold].append(point)

    fold_hulls: list[AuhResult] = []
    for fold, (_, test) in enumerate(partitions):
        hull = convex_hull_auh(by_fold[fold], test.positive_count, test.negative_count)
        LOGGER.info("fold %s: AUH %.4f", fold, hull.auh)
        fold_hulls.append(hull)

    fold_auh = tuple(hull.auh for hull in fold_hulls)
    trivial = sum(point.is_trivial for point in results)
    pooled = auh_from_rates(point.rates() for point in results)

    return CvReport(
        fold_auh=fold_auh,
        mean=math.fsum(fold_auh) / len(fold_auh),
        std=float(np.std(fold_auh, ddof=1)),
        trivial_fraction=trivial / len(results),
        points=tuple((fold, point) for (fold, _), point in zip(jobs, results)),
        fold_hulls=tuple(fold_hulls),
        pooled_hull=pooled,
    )


def render_points_csv(report: CvReport) -> str:
    rows = [
        [fold, point.cost, point.tp, point.fp, point.tn, point.fn] for fold, point in report.points
    ]
    frame = pd.DataFrame(rows, columns=POINT_COLUMNS)
    return frame.to_csv(index=False, lineterminator="\n")


def report_to_dict(report: CvReport) -> dict[str, object]:
    return {
        "fold_auh": list(report.fold_auh),
        "mean": report.mean,
        "std": report.std,
        "trivial_fraction": report.trivial_fraction,
        "fold_hulls": [[list(vertex) for vertex in hull.hull_vertices] for hull in report.fold_hulls],
        "pooled_hull": {
            "auh": report.pooled_hull.auh,
            "vertices": [list(vertex) for vertex in report.pooled_hull.hull_vertices],
        },
    }


def render_report_json(report: CvReport) -> str:
    return json.dumps(report_to_dict(report), indent=2) + "\n"


def render_hull_csv(hull: AuhResult) -> str:
    frame = pd.DataFrame(list(hull.hull_vertices), columns=["fp_rate", "tp_rate"])
    return frame.to_csv(index=False, lineterminator="\n", float_format="%.17g")


def write_report(report: CvReport, json_path: Path, *, points_path: Path | None = None, hull_path: Path | None = None) -> None:
    if points_path is not None:
        write_text_atomic(points_path, render_points_csv(report))
    if hull_path is not None:
        write_text_atomic(hull_path, render_hull_csv(report.pooled_hull))
    write_text_atomic(json_path, render_report_json(report))
