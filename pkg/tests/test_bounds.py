import logging
import math
from decimal import Decimal, getcontext

import pytest

from box_drawings.bounds import BoundInputError, BoundInputs, complexity_term, empirical_risk, generalization_bound
from box_drawings.models import AxisBox, BoxModel, Dataset


def _decimal_bound(k: int, grid_sizes: tuple[int, ...], m: int, delta: str) -> float:
    getcontext().prec = 50
    per_box = sum(Decimal(size * (size - 1) // 2).ln() for size in grid_sizes)
    factorial = sum((Decimal(value).ln() for value in range(2, k + 1)), Decimal(0))
    radicand = k * per_box - factorial + (1 / Decimal(delta)).ln()
    return float((radicand / (2 * m)).sqrt())


def test_single_box_on_two_point_grid_is_free() -> None:
    assert generalization_bound(BoundInputs(k=1, grid_sizes=(2,), m=10, delta=1.0)) == 0.0


def test_matches_high_precision_value() -> None:
    for k, grid_sizes, m, delta in [(1, (10,), 50, "0.05"), (2, (10, 10), 100, "0.05"), (3, (7, 12, 30), 1000, "0.01")]:
        value = generalization_bound(BoundInputs(k=k, grid_sizes=grid_sizes, m=m, delta=float(delta)))

        assert value == pytest.approx(_decimal_bound(k, grid_sizes, m, delta), rel=1e-12)


def test_shrinks_with_root_m() -> None:
    small = generalization_bound(BoundInputs(k=2, grid_sizes=(20, 20), m=100, delta=0.1))
    large = generalization_bound(BoundInputs(k=2, grid_sizes=(20, 20), m=400, delta=0.1))

    assert large == pytest.approx(small / 2.0, rel=1e-12)


def test_more_boxes_cost_more() -> None:
    values = [generalization_bound(BoundInputs(k=k, grid_sizes=(50, 50), m=200, delta=0.05)) for k in (1, 2, 3)]

    assert values == sorted(values)


def test_negative_radicand_clamps(caplog: pytest.LogCaptureFixture) -> None:
    inputs = BoundInputs(k=3, grid_sizes=(2,), m=10, delta=1.0)

    with caplog.at_level(logging.WARNING, logger="box_drawings.bounds"):
        value = generalization_bound(inputs)

    assert complexity_term(inputs) == pytest.approx(-math.log(6.0))
    assert value == 0.0
    assert "negative" in caplog.text


@pytest.mark.parametrize(
    "kwargs",
    [
        {"k": 0, "grid_sizes": (5,), "m": 10, "delta": 0.1},
        {"k": 1, "grid_sizes": (), "m": 10, "delta": 0.1},
        {"k": 1, "grid_sizes": (1,), "m": 10, "delta": 0.1},
        {"k": 1, "grid_sizes": (5,), "m": 0, "delta": 0.1},
        {"k": 1, "grid_sizes": (5,), "m": 10, "delta": 0.0},
        {"k": 1, "grid_sizes": (5,), "m": 10, "delta": 1.5},
        {"k": True, "grid_sizes": (5,), "m": 10, "delta": 0.1},
    ],
)
def test_rejects_invalid_inputs(kwargs: dict) -> None:
    with pytest.raises(BoundInputError):
        BoundInputs(**kwargs)


def test_empirical_risk_ignores_box_count() -> None:
    data = Dataset(features=[[0.0], [1.0], [2.0]], labels=[1, -1, -1], feature_names=("x",))
    model = BoxModel(
        boxes=(AxisBox(lower=(-1.0,), upper=(0.5,)), AxisBox(lower=(1.5,), upper=(2.5,))),
        feature_names=("x",),
    )

    assert empirical_risk(model, data, 0.5) == 1.5


def test_root_m_scaling_over_decades() -> None:
    values = [generalization_bound(BoundInputs(k=2, grid_sizes=(8, 16), m=m, delta=0.05)) for m in (10**2, 10**4, 10**6)]

    assert values[1] == pytest.approx(values[0] / 10.0, rel=1e-12)
    assert values[2] == pytest.approx(values[0] / 100.0, rel=1e-12)
