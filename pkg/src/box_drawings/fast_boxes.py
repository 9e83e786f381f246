from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from box_drawings.clustering import ClusterResult, kmeans
from box_drawings.config_store import validate_fast_config
from box_drawings.data_io import write_text_atomic
from box_drawings.models import (
    NEGATIVES_ALL_OUT_OF_CLUSTER,
    UNITS_NORMALIZED,
    AxisBox,
    BoxModel,
    Dataset,
    DatasetError,
    FastBoxesConfig,
)
from box_drawings.normalization import denormalize_model, normalize

LOGGER = logging.getLogger(__name__)

SIDE_LOWER = "lower"
SIDE_UPPER = "upper"
TRACE_COLUMNS = ["k", "j", "side", "start", "r_plus", "r_minus", "revised", "final"]


class BoundaryError(ValueError):
    pass


@dataclass(frozen=True)
class BoundarySums:
    """Exponential-loss sums of one box side pair, held as natural logs."""

    log_r_plus_lower: float
    log_r_minus_lower: float
    log_r_plus_upper: float
    log_r_minus_upper: float

    @property
    def r_plus_lower(self) -> float:
        return _exp(self.log_r_plus_lower)

    @property
    def r_minus_lower(self) -> float:
        return _exp(self.log_r_minus_lower)

    @property
    def r_plus_upper(self) -> float:
        return _exp(self.log_r_plus_upper)

    @property
    def r_minus_upper(self) -> float:
        return _exp(self.log_r_minus_upper)


def _exp(value: float) -> float:
    with np.errstate(over="ignore"):
        return float(np.exp(value))


def _log(value: float) -> float:
    return math.log(value) if value > 0.0 else -math.inf


def _log_sum_exp(exponents: np.ndarray) -> float:
    if exponents.size == 0:
        return -math.inf
    return float(logsumexp(exponents))


@dataclass(frozen=True)
class StagedBoxes:
    """Boundaries of every stage as K x n matrices, in normalized units."""

    clusters: ClusterResult
    lower_start: np.ndarray
    upper_start: np.ndarray
    lower_revised: np.ndarray
    upper_revised: np.ndarray
    lower_final: np.ndarray
    upper_final: np.ndarray
    sums: tuple[tuple[BoundarySums, ...], ...]

    @property
    def k(self) -> int:
        return int(self.lower_start.shape[0])

    @property
    def n(self) -> int:
        return int(self.lower_start.shape[1])


@dataclass(frozen=True)
class BoundaryTrace:
    k: int
    j: int
    side: str
    start: float
    r_plus: float
    r_minus: float
    revised: float
    final: float


def tight_boxes(positives: np.ndarray, clusters: ClusterResult) -> tuple[np.ndarray, np.ndarray]:
    points = np.asarray(positives, dtype=float)
    lower = np.empty((clusters.k, points.shape[1]))
    upper = np.empty((clusters.k, points.shape[1]))
    for cluster in range(clusters.k):
        members = points[clusters.members(cluster)]
        if members.shape[0] == 0:
            raise DatasetError(f"cluster {cluster} has no members")
        lower[cluster] = members.min(axis=0)
        upper[cluster] = members.max(axis=0)
    return lower, upper


def _inside_other_dimensions(features: np.ndarray, lower: np.ndarray, upper: np.ndarray, j: int) -> np.ndarray:
    inside = (features >= lower) & (features <= upper)
    inside[:, j] = True
    return np.all(inside, axis=1)


def divide_space(
    features: np.ndarray, lower: np.ndarray, upper: np.ndarray, j: int
) -> tuple[np.ndarray, np.ndarray]:
    """Boolean masks of the points that inform the lower and upper boundary j of one box."""
    values = np.asarray(features, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    column = values[:, j]
    midpoint = (lower[j] + upper[j]) / 2.0
    inside_others = _inside_other_dimensions(values, lower, upper, j)

    x_lower = (column <= lower[j]) | ((column >= lower[j]) & (column <= midpoint) & inside_others)
    x_upper = (column >= upper[j]) | ((column >= midpoint) & (column <= upper[j]) & inside_others)
    return x_lower, x_upper


def _hinge(features: np.ndarray, lower: np.ndarray, upper: np.ndarray, j: int) -> np.ndarray:
    excess = np.maximum(features - upper, 0.0) + np.maximum(lower - features, 0.0)
    excess[:, j] = 0.0
    return excess.sum(axis=1)


def boundary_sums(
    features: np.ndarray,
    positive_mask: np.ndarray,
    negative_mask: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    j: int,
    x_lower: np.ndarray,
    x_upper: np.ndarray,
) -> BoundarySums:
    """Exponential-loss sums of one box side pair.

    ``positive_mask`` selects the cluster's positives and ``negative_mask`` the
    points the boundary has to keep out. The hinge over the other features can
    reach hundreds on wide data, so the sums are accumulated as logs.
    """
    values = np.asarray(features, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    column = values[:, j]
    hinge = _hinge(values, lower, upper, j)

    lower_pos = positive_mask & x_lower
    lower_neg = negative_mask & x_lower
    upper_pos = positive_mask & x_upper
    upper_neg = negative_mask & x_upper

    return BoundarySums(
        log_r_plus_lower=_log_sum_exp(-(column[lower_pos] - lower[j] + 1.0)),
        log_r_minus_lower=_log_sum_exp(column[lower_neg] - lower[j] + 1.0 + hinge[lower_neg]),
        log_r_plus_upper=_log_sum_exp(-(upper[j] - column[upper_pos] + 1.0)),
        log_r_minus_upper=_log_sum_exp(upper[j] - column[upper_neg] + 1.0 + hinge[upper_neg]),
    )


def _log_denominator(log_r_plus: float, log_r_minus: float, c: float, beta: float) -> float:
    # log(beta + sqrt(beta^2 + 4*c*r_plus*r_minus))
    log_beta = _log(beta)
    log_product = math.log(4.0 * c) + log_r_plus + log_r_minus
    return float(np.logaddexp(log_beta, 0.5 * np.logaddexp(2.0 * log_beta, log_product)))


def solve_lower_log(
    l_s: float,
    log_r_plus: float,
    log_r_minus: float,
    c: float,
    beta: float,
    *,
    r_minus_threshold: float = 1e-8,
) -> float:
    """Revised lower boundary from the logs of R+ and R-."""
    if log_r_minus <= math.log(r_minus_threshold):
        return -math.inf
    if log_r_plus == -math.inf:
        raise BoundaryError("lower boundary has negatives to push against but no positive weight")
    if log_r_minus == math.inf:
        return l_s
    # Root of r_plus*t^2 + beta*t - c*r_minus, written without cancellation.
    log_root = math.log(2.0 * c) + log_r_minus - _log_denominator(log_r_plus, log_r_minus, c, beta)
    return l_s - 1.0 + log_root


def solve_upper_log(
    u_s: float,
    log_r_plus: float,
    log_r_minus: float,
    c: float,
    beta: float,
    *,
    r_minus_threshold: float = 1e-8,
) -> float:
    """Revised upper boundary from the logs of R+ and R-."""
    if log_r_minus <= math.log(r_minus_threshold):
        return math.inf
    if log_r_plus == -math.inf:
        raise BoundaryError("upper boundary has negatives to push against but no positive weight")
    if log_r_minus == math.inf:
        return u_s
    log_root = _log_denominator(log_r_plus, log_r_minus, c, beta) - math.log(2.0 * c) - log_r_minus
    return u_s + 1.0 + log_root


def solve_lower(
    l_s: float, r_plus: float, r_minus: float, c: float, beta: float, *, r_minus_threshold: float = 1e-8
) -> float:
    return solve_lower_log(l_s, _log(r_plus), _log(r_minus), c, beta, r_minus_threshold=r_minus_threshold)


def solve_upper(
    u_s: float, r_plus: float, r_minus: float, c: float, beta: float, *, r_minus_threshold: float = 1e-8
) -> float:
    return solve_upper_log(u_s, _log(r_plus), _log(r_minus), c, beta, r_minus_threshold=r_minus_threshold)


def final_expansion(
    lower_start: np.ndarray,
    upper_start: np.ndarray,
    lower_revised: np.ndarray,
    upper_revised: np.ndarray,
    negatives: np.ndarray,
    epsilon_expand: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Grow every box to within epsilon of the nearest negative beyond it.

    The result never cuts into the starting or revised box; with no negative
    beyond a side that side becomes unbounded.
    """
    lowest = np.minimum(np.asarray(lower_revised, dtype=float), np.asarray(lower_start, dtype=float))
    highest = np.maximum(np.asarray(upper_revised, dtype=float), np.asarray(upper_start, dtype=float))
    negatives = np.asarray(negatives, dtype=float).reshape(-1, lowest.shape[1])

    lower_final = np.full_like(lowest, -np.inf)
    upper_final = np.full_like(highest, np.inf)
    for j in range(lowest.shape[1]):
        column = np.sort(negatives[:, j])
        if column.size == 0:
            continue

        below = np.searchsorted(column, lowest[:, j], side="left")
        has_below = below > 0
        nearest_below = column[np.maximum(below - 1, 0)]
        lower_final[:, j] = np.where(has_below, np.minimum(nearest_below + epsilon_expand, lowest[:, j]), -np.inf)

        above = np.searchsorted(column, highest[:, j], side="right")
        has_above = above < column.size
        nearest_above = column[np.minimum(above, column.size - 1)]
        upper_final[:, j] = np.where(has_above, np.maximum(nearest_above - epsilon_expand, highest[:, j]), np.inf)

    return lower_final, upper_final


def _discrimination_mask(data: Dataset, positive_index: np.ndarray, clusters: ClusterResult, cluster: int, mode: str) -> np.ndarray:
    mask = data.negative_mask.copy()
    if mode == NEGATIVES_ALL_OUT_OF_CLUSTER:
        others = positive_index[clusters.assignments != cluster]
        mask[others] = True
    return mask


def _fit_boundary(
    features: np.ndarray,
    positive_mask: np.ndarray,
    negative_mask: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    j: int,
    config: FastBoxesConfig,
) -> tuple[BoundarySums, float, float]:
    x_lower, x_upper = divide_space(features, lower, upper, j)
    sums = boundary_sums(features, positive_mask, negative_mask, lower, upper, j, x_lower, x_upper)
    revised_lower = solve_lower_log(
        float(lower[j]),
        sums.log_r_plus_lower,
        sums.log_r_minus_lower,
        config.c,
        config.beta,
        r_minus_threshold=config.r_minus_threshold,
    )
    revised_upper = solve_upper_log(
        float(upper[j]),
        sums.log_r_plus_upper,
        sums.log_r_minus_upper,
        config.c,
        config.beta,
        r_minus_threshold=config.r_minus_threshold,
    )
    return sums, revised_lower, revised_upper


def fit_staged_boxes(data: Dataset, config: FastBoxesConfig, *, max_workers: int = 1) -> StagedBoxes:
    """Run every Fast Boxes stage on data already normalized to [-1, 1]."""
    config = validate_fast_config(config)
    data.require_trainable()
    if data.positive_count < config.k:
        raise DatasetError(f"need at least {config.k} positives for {config.k} boxes, got {data.positive_count}")

    positive_index = np.flatnonzero(data.positive_mask)
    positives = data.features[positive_index]
    clusters = kmeans(
        positives,
        config.k,
        seed=config.kmeans_seed,
        restarts=config.kmeans_restarts,
        max_iter=config.kmeans_max_iter,
    )
    lower_start, upper_start = tight_boxes(positives, clusters)

    jobs: list[tuple[int, int]] = [(cluster, j) for cluster in range(config.k) for j in range(data.n)]
    masks: list[tuple[np.ndarray, np.ndarray]] = []
    for cluster in range(config.k):
        positive_mask = np.zeros(data.m, dtype=bool)
        positive_mask[positive_index[clusters.assignments == cluster]] = True
        negative_mask = _discrimination_mask(
            data, positive_index, clusters, cluster, config.negatives_for_discrimination
        )
        masks.append((positive_mask, negative_mask))

    def run(job: tuple[int, int]) -> tuple[BoundarySums, float, float]:
        cluster, j = job
        positive_mask, negative_mask = masks[cluster]
        return _fit_boundary(
            data.features, positive_mask, negative_mask, lower_start[cluster], upper_start[cluster], j, config
        )

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            results = list(executor.map(run, jobs))
    else:
        results = [run(job) for job in jobs]

    lower_revised = np.empty_like(lower_start)
    upper_revised = np.empty_like(upper_start)
    sums: list[list[BoundarySums]] = [[] for _ in range(config.k)]
    for (cluster, j), (boundary, revised_lower, revised_upper) in zip(jobs, results):
        lower_revised[cluster, j] = revised_lower
        upper_revised[cluster, j] = revised_upper
        sums[cluster].append(boundary)

    if config.final_expansion:
        lower_final, upper_final = final_expansion(
            lower_start,
            upper_start,
            lower_revised,
            upper_revised,
            data.features[data.negative_mask],
            config.epsilon_expand,
        )
    else:
        lower_final = np.minimum(lower_revised, lower_start)
        upper_final = np.maximum(upper_revised, upper_start)

    return StagedBoxes(
        clusters=clusters,
        lower_start=lower_start,
        upper_start=upper_start,
        lower_revised=lower_revised,
        upper_revised=upper_revised,
        lower_final=lower_final,
        upper_final=upper_final,
        sums=tuple(tuple(row) for row in sums),
    )


def trace_rows(staged: StagedBoxes) -> list[BoundaryTrace]:
    rows: list[BoundaryTrace] = []
    for cluster in range(staged.k):
        for j in range(staged.n):
            sums = staged.sums[cluster][j]
            rows.append(
                BoundaryTrace(
                    k=cluster,
                    j=j,
                    side=SIDE_LOWER,
                    start=float(staged.lower_start[cluster, j]),
                    r_plus=sums.r_plus_lower,
                    r_minus=sums.r_minus_lower,
                    revised=float(staged.lower_revised[cluster, j]),
                    final=float(staged.lower_final[cluster, j]),
                )
            )
            rows.append(
                BoundaryTrace(
                    k=cluster,
                    j=j,
                    side=SIDE_UPPER,
                    start=float(staged.upper_start[cluster, j]),
                    r_plus=sums.r_plus_upper,
                    r_minus=sums.r_minus_upper,
                    revised=float(staged.upper_revised[cluster, j]),
                    final=float(staged.upper_final[cluster, j]),
                )
            )
    return rows


def render_trace_csv(rows: list[BoundaryTrace]) -> str:
    frame = pd.DataFrame(
        [[getattr(row, name) for name in TRACE_COLUMNS] for row in rows],
        columns=TRACE_COLUMNS,
    )
    return frame.to_csv(index=False, lineterminator="\n", float_format="%.17g")


def write_trace_csv(path: Path, rows: list[BoundaryTrace]) -> None:
    write_text_atomic(path, render_trace_csv(rows))


def train_fast_boxes(
    data: Dataset,
    config: FastBoxesConfig,
    *,
    trace: list[BoundaryTrace] | None = None,
    max_workers: int = 1,
) -> BoxModel:
    normalized, params = normalize(data)
    staged = fit_staged_boxes(normalized, config, max_workers=max_workers)

    boxes = tuple(
        AxisBox(lower=staged.lower_final[cluster], upper=staged.upper_final[cluster]) for cluster in range(staged.k)
    )
    model = BoxModel(boxes=boxes, feature_names=data.feature_names, units=UNITS_NORMALIZED, norm=params)

    if trace is not None:
        rows = trace_rows(staged)
        for row in rows:
            LOGGER.debug("boundary %s", row)
        trace.extend(rows)

    LOGGER.debug("Fast Boxes fit: k=%s c=%s beta=%s", config.k, config.c, config.beta)
    restored = denormalize_model(model, params)

    # The inverse map can round a boundary past the cluster point that defined it.
    positives = data.features[data.positive_mask]
    tight_lower, tight_upper = tight_boxes(positives, staged.clusters)
    boxes = tuple(
        AxisBox(
            lower=np.minimum(np.asarray(box.lower), tight_lower[cluster]),
            upper=np.maximum(np.asarray(box.upper), tight_upper[cluster]),
        )
        for cluster, box in enumerate(restored.boxes)
    )
    return replace(restored, boxes=boxes)


def fast_trainer(config: FastBoxesConfig, *, max_workers: int = 1) -> Callable[[Dataset, float], BoxModel]:
    """Trainer for cost sweeps: the sweep cost replaces the majority weight c."""

    def train(data: Dataset, cost: float) -> BoxModel:
        return train_fast_boxes(data, replace(config, c=cost), max_workers=max_workers)

    return train
