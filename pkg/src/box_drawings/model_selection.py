from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, replace
from typing import Sequence

from box_drawings.evaluation import DEFAULT_COSTS, evaluate_cv
from box_drawings.fast_boxes import fast_trainer, train_fast_boxes
from box_drawings.models import BoxModel, Dataset, DatasetError, FastBoxesConfig, GridSearchSpace

LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridScore:
    k: int
    beta: float
    mean_auh: float


@dataclass(frozen=True)
class SelectionResult:
    config: FastBoxesConfig
    scores: tuple[GridScore, ...]


def select_hyperparameters(
    data: Dataset,
    grid: GridSearchSpace,
    base_config: FastBoxesConfig = FastBoxesConfig(),
    *,
    folds: int = 3,
    costs: Sequence[float] = DEFAULT_COSTS,
    seed: int = 0,
) -> SelectionResult:
    points = grid.points()
    if not points:
        raise ValueError("hyperparameter grid is empty")

    scores: list[GridScore] = []
    for k, beta in points:
        candidate = replace(base_config, k=k, beta=beta)
        try:
            report = evaluate_cv(data, fast_trainer(candidate), costs, folds, seed)
        except DatasetError as exc:
            LOGGER.warning("Skipping grid point k=%s beta=%s: %s", k, beta, exc)
            continue
        LOGGER.info("grid point k=%s beta=%s: mean AUH %.4f", k, beta, report.mean)
        scores.append(GridScore(k=k, beta=beta, mean_auh=report.mean))

    if not scores:
        raise DatasetError("no grid point could be trained on this data")

    # Highest AUH first, then fewest boxes, then least expansion.
    best = min(scores, key=lambda score: (-score.mean_auh, score.k, score.beta))
    selected = replace(base_config, k=best.k, beta=best.beta)
    LOGGER.info("selected k=%s beta=%s (mean AUH %.4f)", best.k, best.beta, best.mean_auh)
    return SelectionResult(config=selected, scores=tuple(scores))


class SelectingFastTrainer:
    """Cost-sweep trainer that tunes K and beta on each training split it sees.

    Selection runs once per distinct training set, so every cost of a fold
    shares the selected configuration.
    """

    def __init__(
        self,
        grid: GridSearchSpace,
        base_config: FastBoxesConfig = FastBoxesConfig(),
        *,
        folds: int = 3,
        costs: Sequence[float] = DEFAULT_COSTS,
        seed: int = 0,
    ) -> None:
        self._grid = grid
        self._base_config = base_config
        self._folds = folds
        self._costs = tuple(costs)
        self._seed = seed
        self._selected: dict[str, FastBoxesConfig] = {}
        self._lock = threading.Lock()

    def selected_config(self, data: Dataset) -> FastBoxesConfig:
        key = data.fingerprint()
        with self._lock:
            config = self._selected.get(key)
            if config is None:
                result = select_hyperparameters(
                    data,
                    self._grid,
                    self._base_config,
                    folds=self._folds,
                    costs=self._costs,
                    seed=self._seed,
                )
                config = result.config
                self._selected[key] = config
        return config

    def __call__(self, data: Dataset, cost: float) -> BoxModel:
        return train_fast_boxes(data, replace(self.selected_config(data), c=cost))
