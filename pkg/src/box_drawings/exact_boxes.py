from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from box_drawings.box_logic import check_units, predict_many
from box_drawings.clustering import kmeans
from box_drawings.config_store import validate_exact_config
from box_drawings.mip import require_normalized_features, warn_on_margin
from box_drawings.models import (
    AxisBox,
    BoxModel,
    Dataset,
    DatasetError,
    ExactBoxesConfig,
)
from box_drawings.normalization import denormalize_model, normalize

LOGGER = logging.getLogger(__name__)

PROVEN_OPTIMAL = "proven_optimal"
INCUMBENT = "incumbent"
DEFAULT_BUDGET = 1_000_000
NEIGHBORHOOD_ANY = "any"
NEIGHBORHOOD_ALL = "all"
DEFAULT_TAU_FRACTION = 0.1
GRID_OFFSET = 0.5


@dataclass(frozen=True)
class ExactSolution:
    model: BoxModel
    objective: float
    optimality: str
    nodes_explored: int


class _BudgetExhausted(Exception):
    pass


def objective_value(model: BoxModel, data: Dataset, c_i: float, c_e: float) -> float:
    check_units(model, data)
    predictions = predict_many(model, data.features)
    true_positives = int(np.count_nonzero((predictions == 1) & data.positive_mask))
    true_negatives = int(np.count_nonzero((predictions == -1) & data.negative_mask))
    return true_positives + c_i * true_negatives - c_e * model.k


def _grid(column: np.ndarray) -> np.ndarray:
    values = np.unique(column)
    midpoints = (values[:-1] + values[1:]) / 2.0
    return np.concatenate([[values[0] - GRID_OFFSET], midpoints, [values[-1] + GRID_OFFSET]])


def candidate_grid(data: Dataset, j: int) -> np.ndarray:
    if data.m == 0:
        raise DatasetError("candidate grid needs at least one example")
    return _grid(data.features[:, j])


def _bitmask(flags: np.ndarray) -> int:
    mask = 0
    for index in np.flatnonzero(flags):
        mask |= 1 << int(index)
    return mask


class _BoxSearch:
    """Depth-first branch and bound over unions of candidate boxes.

    Points are bits of Python integers. A candidate box is the tightest grid
    box around some set of positives; its boundaries are the grid values just
    outside positive coordinates, which loses nothing since shrinking a box to
    its positives never uncovers a positive and never covers a new negative.
    """

    def __init__(self, data: Dataset, config: ExactBoxesConfig, budget: int) -> None:
        self.config = config
        self.budget = budget
        self.nodes = 0
        self.positive = _bitmask(data.positive_mask)
        self.negative = _bitmask(data.negative_mask)
        self.negative_count = data.negative_count
        self.candidates = self._enumerate_boxes(data)
        self.masks = [mask for mask, _ in self.candidates]

        self.suffix_union = [0] * (len(self.masks) + 1)
        for index in range(len(self.masks) - 1, -1, -1):
            self.suffix_union[index] = self.suffix_union[index + 1] | self.masks[index]

        self.best_value = self.score(0, 0)
        self.best_choice: tuple[int, ...] = ()

    def _enumerate_boxes(self, data: Dataset) -> list[tuple[int, tuple[tuple[float, float], ...]]]:
        positives = data.features[data.positive_mask]
        partial: dict[int, tuple[tuple[float, float], ...]] = {(1 << data.m) - 1: ()}
        for j in range(data.n):
            grid = candidate_grid(data, j)
            column = data.features[:, j]
            at_least = [_bitmask(column >= value) for value in grid]
            at_most = [_bitmask(column <= value) for value in grid]

            anchors = np.searchsorted(grid, np.unique(positives[:, j]))
            lower_options = sorted(set(int(a) - 1 for a in anchors))
            upper_options = sorted(set(int(a) for a in anchors))

            extended: dict[int, tuple[tuple[float, float], ...]] = {}
            for mask, bounds in partial.items():
                for low in lower_options:
                    for high in upper_options:
                        if low >= high:
                            continue
                        covered = mask & at_least[low] & at_most[high]
                        if covered & self.positive and covered not in extended:
                            extended[covered] = bounds + ((float(grid[low]), float(grid[high])),)
            partial = extended

        # Lexicographic order on the boundaries fixes one representative per box set.
        return sorted(partial.items(), key=lambda item: item[1])

    def score(self, covered: int, boxes: int) -> float:
        true_positives = (covered & self.positive).bit_count()
        true_negatives = self.negative_count - (covered & self.negative).bit_count()
        return true_positives + self.config.c_i * true_negatives - self.config.c_e * boxes

    def run(self) -> bool:
        try:
            self._search(0, 0, ())
        except _BudgetExhausted:
            return False
        return True

    def _search(self, start: int, covered: int, chosen: tuple[int, ...]) -> None:
        self.nodes += 1
        if self.nodes > self.budget:
            raise _BudgetExhausted

        value = self.score(covered, len(chosen))
        if value > self.best_value:
            self.best_value = value
            self.best_choice = chosen
            LOGGER.debug("incumbent %s with %s boxes after %s nodes", value, len(chosen), self.nodes)

        if len(chosen) >= self.config.k:
            return

        for index in range(start, len(self.masks)):
            box = self.masks[index]
            if not box & self.positive & ~covered:
                continue
            union = covered | box
            best_positives = ((self.suffix_union[index] | covered) & self.positive).bit_count()
            best_negatives = self.negative_count - (union & self.negative).bit_count()
            bound = best_positives + self.config.c_i * best_negatives - self.config.c_e * (len(chosen) + 1)
            if bound <= self.best_value:
                continue
            self._search(index + 1, union, chosen + (index,))


def solve_exact_small(data: Dataset, config: ExactBoxesConfig, budget: int = DEFAULT_BUDGET) -> ExactSolution:
    """Best union of at most K grid boxes on data lying in [-1, 1].

    Each box used costs c_e, so fewer than K boxes come back when extra boxes
    do not pay for themselves.
    """
    config = validate_exact_config(config)
    if budget < 1:
        raise ValueError("budget must be >= 1")
    require_normalized_features(data.features)
    warn_on_margin(data.features, config.margin)

    search = _BoxSearch(data, config, budget)
    finished = search.run()

    boxes = tuple(
        AxisBox(
            lower=[low for low, _ in search.candidates[index][1]],
            upper=[high for _, high in search.candidates[index][1]],
        )
        for index in search.best_choice
    )
    model = BoxModel(boxes=boxes, feature_names=data.feature_names, units=data.units)
    optimality = PROVEN_OPTIMAL if finished else INCUMBENT
    LOGGER.info(
        "exact search: %s boxes, objective %s, %s after %s nodes",
        model.k,
        search.best_value,
        optimality,
        search.nodes,
    )
    return ExactSolution(
        model=model,
        objective=objective_value(model, data, config.c_i, config.c_e),
        optimality=optimality,
        nodes_explored=search.nodes,
    )


def enumerate_exact(data: Dataset, config: ExactBoxesConfig) -> float:
    """Best objective over every union of at most K boxes drawn from the full candidate grid.

    Brute force over distinct coverage sets; feasible only for a handful of points.
    """
    config = validate_exact_config(config)
    if data.m > 62:
        raise ValueError("enumerate_exact handles at most 62 examples")

    weights = np.left_shift(np.uint64(1), np.arange(data.m, dtype=np.uint64))
    masks = np.array([np.uint64((1 << data.m) - 1)], dtype=np.uint64)
    for j in range(data.n):
        grid = candidate_grid(data, j)
        column = data.features[:, j]
        inside = (column[None, None, :] >= grid[:, None, None]) & (column[None, None, :] <= grid[None, :, None])
        low, high = np.triu_indices(grid.size, k=1)
        slabs = (inside[low, high] * weights).sum(axis=1, dtype=np.uint64)
        masks = np.unique(np.bitwise_and(masks[:, None], slabs[None, :]))

    positive = np.uint64(_bitmask(data.positive_mask))
    negative = np.uint64(_bitmask(data.negative_mask))

    def best_score(unions: np.ndarray, boxes: int) -> float:
        tp = np.bitwise_count(unions & positive).astype(float)
        tn = data.negative_count - np.bitwise_count(unions & negative).astype(float)
        return float(np.max(tp + config.c_i * tn - config.c_e * boxes))

    best = best_score(np.array([0], dtype=np.uint64), 0)
    seen = np.array([0], dtype=np.uint64)
    layer = seen
    for boxes in range(1, config.k + 1):
        layer = np.setdiff1d(np.unique(np.bitwise_or(layer[:, None], masks[None, :])), seen)
        if layer.size == 0:
            break
        seen = np.union1d(seen, layer)
        best = max(best, best_score(layer, boxes))
    return best


def widen_model(model: BoxModel, data: Dataset) -> BoxModel:
    """Push every boundary to the outermost grid value that keeps the covered set."""
    grids = [candidate_grid(data, j) for j in range(data.n)]
    features = data.features
    widened: list[AxisBox] = []
    for box in model.boxes:
        lower = np.array(box.lower, dtype=float)
        upper = np.array(box.upper, dtype=float)
        for j, grid in enumerate(grids):
            others = (features >= lower) & (features <= upper)
            others[:, j] = True
            in_slab = np.all(others, axis=1)
            column = features[:, j]

            blockers = column[in_slab & (column < lower[j])]
            lower[j] = min(lower[j], grid[0] if blockers.size == 0 else grid[np.searchsorted(grid, blockers.max(), side="right")])

            blockers = column[in_slab & (column > upper[j])]
            upper[j] = max(upper[j], grid[-1] if blockers.size == 0 else grid[np.searchsorted(grid, blockers.min(), side="left") - 1])
        widened.append(AxisBox(lower=lower, upper=upper))
    return replace(model, boxes=tuple(widened))


def neighborhood_filter(data: Dataset, tau: float | np.ndarray | None = None, mode: str = NEIGHBORHOOD_ANY) -> Dataset:
    """Keep every positive and the negatives near the positives' bounding box.

    ``mode="any"`` keeps a negative close to the positive range in at least one
    feature, ``mode="all"`` only one close in every feature. ``tau`` defaults to
    a tenth of each positive range.
    """
    if mode not in {NEIGHBORHOOD_ANY, NEIGHBORHOOD_ALL}:
        raise ValueError(f"neighborhood mode must be '{NEIGHBORHOOD_ANY}' or '{NEIGHBORHOOD_ALL}'")
    positives = data.features[data.positive_mask]
    if positives.shape[0] == 0:
        raise DatasetError("neighborhood filter needs at least one positive")

    low = positives.min(axis=0)
    high = positives.max(axis=0)
    slack = DEFAULT_TAU_FRACTION * (high - low) if tau is None else np.broadcast_to(np.asarray(tau, dtype=float), low.shape)
    if np.any(slack < 0):
        raise ValueError("tau must be >= 0")

    distance = np.maximum(np.maximum(low - data.features, data.features - high), 0.0)
    close = distance <= slack
    near = np.any(close, axis=1) if mode == NEIGHBORHOOD_ANY else np.all(close, axis=1)
    keep = data.positive_mask | near
    LOGGER.debug("neighborhood filter kept %s of %s negatives", int(np.count_nonzero(keep & data.negative_mask)), data.negative_count)
    return data.subset(np.flatnonzero(keep))


def cluster_decompose_mip(
    data: Dataset,
    config: ExactBoxesConfig,
    *,
    budget: int = DEFAULT_BUDGET,
    tau: float | np.ndarray | None = None,
    mode: str = NEIGHBORHOOD_ANY,
    kmeans_seed: int = 0,
    kmeans_restarts: int = 10,
    kmeans_max_iter: int = 100,
) -> BoxModel:
    """Union of single-box exact solutions, one per cluster of positives."""
    config = validate_exact_config(config)
    data.require_trainable()
    if data.positive_count < config.k:
        raise DatasetError(f"need at least {config.k} positives for {config.k} clusters, got {data.positive_count}")

    positive_index = np.flatnonzero(data.positive_mask)
    negative_index = np.flatnonzero(data.negative_mask)
    clusters = kmeans(
        data.features[positive_index],
        config.k,
        seed=kmeans_seed,
        restarts=kmeans_restarts,
        max_iter=kmeans_max_iter,
    )
    single = replace(config, k=1)

    boxes: list[AxisBox] = []
    for cluster in range(config.k):
        members = positive_index[clusters.members(cluster)]
        local = neighborhood_filter(data.subset(np.concatenate([members, negative_index])), tau, mode)
        solution = solve_exact_small(local, single, budget)
        LOGGER.info("cluster %s: %s points, %s", cluster, local.m, solution.optimality)
        boxes.extend(widen_model(solution.model, local).boxes)

    return BoxModel(boxes=tuple(boxes), feature_names=data.feature_names, units=data.units)


def train_exact_boxes(
    data: Dataset,
    config: ExactBoxesConfig,
    *,
    budget: int = DEFAULT_BUDGET,
    decompose: bool = False,
    kmeans_seed: int = 0,
) -> BoxModel:
    data.require_trainable()
    normalized, params = normalize(data)
    if decompose:
        model = cluster_decompose_mip(normalized, config, budget=budget, kmeans_seed=kmeans_seed)
    else:
        model = widen_model(solve_exact_small(normalized, config, budget).model, normalized)
    return denormalize_model(model, params)


def exact_trainer(
    config: ExactBoxesConfig, *, budget: int = DEFAULT_BUDGET, decompose: bool = False, kmeans_seed: int = 0
) -> Callable[[Dataset, float], BoxModel]:
    """Trainer for cost sweeps: the sweep cost replaces the majority weight c_i."""

    def train(data: Dataset, cost: float) -> BoxModel:
        return train_exact_boxes(
            data, replace(config, c_i=cost), budget=budget, decompose=decompose, kmeans_seed=kmeans_seed
        )

    return train
