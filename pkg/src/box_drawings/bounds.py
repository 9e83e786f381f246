from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from box_drawings.exact_boxes import objective_value
from box_drawings.models import BoxModel, Dataset

LOGGER = logging.getLogger(__name__)


class BoundInputError(ValueError):
    pass


@dataclass(frozen=True)
class BoundInputs:
    k: int
    grid_sizes: tuple[int, ...]
    m: int
    delta: float

    def __post_init__(self) -> None:
        grid_sizes = tuple(self.grid_sizes)
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise BoundInputError("k must be an integer >= 1")
        if not grid_sizes:
            raise BoundInputError("at least one grid size is required")
        for size in grid_sizes:
            if isinstance(size, bool) or not isinstance(size, int) or size < 2:
                raise BoundInputError(f"grid sizes must be integers >= 2, got {size!r}")
        if isinstance(self.m, bool) or not isinstance(self.m, int) or self.m < 1:
            raise BoundInputError("m must be an integer >= 1")
        if not 0.0 < self.delta <= 1.0:
            raise BoundInputError("delta must be in (0, 1]")
        object.__setattr__(self, "grid_sizes", grid_sizes)


def log_factorial(k: int) -> float:
    return math.fsum(math.log(value) for value in range(2, k + 1))


def complexity_term(inputs: BoundInputs) -> float:
    """Log-count of distinct box drawings plus the confidence term."""
    per_box = math.fsum(math.log(size * (size - 1) / 2) for size in inputs.grid_sizes)
    return inputs.k * per_box - log_factorial(inputs.k) + math.log(1.0 / inputs.delta)


def generalization_bound(inputs: BoundInputs) -> float:
    radicand = complexity_term(inputs)
    if radicand < 0.0:
        LOGGER.warning("Bound radicand %s is negative for k=%s; clamping to 0", radicand, inputs.k)
        radicand = 0.0
    return math.sqrt(radicand / (2.0 * inputs.m))


def empirical_risk(model: BoxModel, data: Dataset, c_i: float) -> float:
    """Weighted count of correct predictions, as a gain with no averaging."""
    return objective_value(model, data, c_i, 0.0)
