import math
from pathlib import Path

import numpy as np
import pytest

from box_drawings.exact_boxes import solve_exact_small
from box_drawings.mip import (
    MipError,
    MipModel,
    build_mip,
    check_feasibility,
    emit_lp,
    extract_model,
    lift_solution,
    mip_objective,
    parse_lp,
    read_solution,
    render_lp,
    render_solution,
)
from box_drawings.models import UNITS_NORMALIZED, AxisBox, BoxModel, Dataset, ExactBoxesConfig

LINE = Dataset(
    features=[[0.0], [0.2], [0.3], [0.6]],
    labels=[-1, 1, 1, -1],
    feature_names=("x",),
    units=UNITS_NORMALIZED,
)


def _pair() -> Dataset:
    return Dataset(features=[[0.5], [-0.5]], labels=[1, -1], feature_names=("x",), units=UNITS_NORMALIZED)


def _grid_instance(rng: np.random.Generator, m: int, n: int) -> Dataset:
    features = rng.integers(-10, 11, size=(m, n)) / 10.0
    labels = np.where(rng.uniform(size=m) < 0.4, 1, -1)
    labels[0], labels[1] = 1, -1
    return Dataset(features=features, labels=labels, feature_names=[f"f{j}" for j in range(n)], units=UNITS_NORMALIZED)


def test_counts_for_two_points() -> None:
    mip = build_mip(_pair(), ExactBoxesConfig(k=1))

    assert len(mip.binary) == 8
    assert len(mip.continuous) == 2
    assert len(mip.constraints) == 17


def test_counts_follow_the_formula() -> None:
    data = _grid_instance(np.random.default_rng(0), 7, 3)
    m, n, k = 7, 3, 2

    mip = build_mip(data, ExactBoxesConfig(k=k))

    assert len(mip.binary) == 2 * m * n * k + m * k + m
    assert len(mip.continuous) == 2 * n * k
    assert len(mip.constraints) == m * (4 * n * k + 2 * k + 2) + n * k


def test_rejects_unnormalized_data() -> None:
    data = Dataset(features=[[0.0], [3.0]], labels=[1, -1], feature_names=("x",))

    with pytest.raises(MipError):
        build_mip(data, ExactBoxesConfig())


def test_cell_cap() -> None:
    with pytest.raises(MipError, match="exceeds the cap"):
        build_mip(LINE, ExactBoxesConfig(k=2), cell_cap=7)


def test_empty_model_renders_header_and_objective() -> None:
    mip = MipModel(
        continuous=(), binary=(), constraints=(), objective=(), objective_constant=0.0, labels=(), n=0, k=0, feature_names=()
    )

    lines = render_lp(mip).splitlines()

    assert lines[2:] == ["Maximize", " obj:", "End"]
    assert parse_lp(render_lp(mip)).rows == ()


def test_emitted_file_parses_back(tmp_path: Path) -> None:
    mip = build_mip(_pair(), ExactBoxesConfig(k=1, c_i=0.5, c_e=0.25))
    path = tmp_path / "model.lp"

    emit_lp(mip, path)
    summary = parse_lp(path.read_text(encoding="utf-8"))

    assert summary.rows == tuple(row.name for row in mip.constraints)
    assert len(summary.rows) == 17
    assert set(summary.variables) == set(mip.variables)
    assert "objective constant -0.25" in path.read_text(encoding="utf-8")


def test_solution_names_match_lp_variables() -> None:
    config = ExactBoxesConfig(k=1)
    mip = build_mip(LINE, config)
    solution = solve_exact_small(LINE, config)

    text = render_solution(mip, lift_solution(solution.model, LINE, config))

    assert set(read_solution(text)) == set(parse_lp(render_lp(mip)).variables)


def test_lifted_line_solution_is_feasible() -> None:
    config = ExactBoxesConfig(k=1)
    mip = build_mip(LINE, config)
    solution = solve_exact_small(LINE, config)

    assignment = lift_solution(solution.model, LINE, config)

    assert check_feasibility(mip, assignment) == []
    assert mip_objective(mip, assignment) == solution.objective == 4.0


def test_flipped_indicator_is_reported() -> None:
    config = ExactBoxesConfig(k=1)
    mip = build_mip(LINE, config)
    assignment = lift_solution(solve_exact_small(LINE, config).model, LINE, config)

    assignment["z_1"] = 0.0
    violations = check_feasibility(mip, assignment)

    assert {violation.family for violation in violations} & {11, 12}

    assignment["z_1"] = 1.0
    assignment["z_0"] = 0.0
    assert {violation.family for violation in check_feasibility(mip, assignment)} & {19, 20}


def test_inverted_box_is_reported() -> None:
    config = ExactBoxesConfig(k=1)
    mip = build_mip(LINE, config)
    assignment = lift_solution(solve_exact_small(LINE, config).model, LINE, config)

    assignment["l_0_0"], assignment["u_0_0"] = 0.5, 0.4

    assert 21 in {violation.family for violation in check_feasibility(mip, assignment)}


def test_missing_and_fractional_values() -> None:
    config = ExactBoxesConfig(k=1)
    mip = build_mip(_pair(), config)
    assignment = lift_solution(BoxModel(boxes=(), feature_names=("x",), units=UNITS_NORMALIZED), _pair(), config)

    assignment["w_0_0"] = 0.5
    with pytest.raises(MipError, match="binary variable"):
        check_feasibility(mip, assignment)

    del assignment["w_0_0"]
    with pytest.raises(MipError, match="missing"):
        check_feasibility(mip, assignment)


def test_lifted_solutions_are_feasible_on_grid_data() -> None:
    rng = np.random.default_rng(17)
    for _ in range(20):
        data = _grid_instance(rng, int(rng.integers(4, 9)), int(rng.integers(1, 3)))
        config = ExactBoxesConfig(k=int(rng.integers(1, 3)), c_i=0.5)
        mip = build_mip(data, config)
        solution = solve_exact_small(data, config)

        assignment = lift_solution(solution.model, data, config)

        assert check_feasibility(mip, assignment) == []
        assert mip_objective(mip, assignment) == pytest.approx(solution.objective)


def test_unbounded_sides_lift_inside_the_parking_range() -> None:
    config = ExactBoxesConfig(k=2)
    model = BoxModel(boxes=(AxisBox(lower=(-math.inf,), upper=(0.45,)),), feature_names=("x",), units=UNITS_NORMALIZED)

    assignment = lift_solution(model, LINE, config)

    assert assignment["l_0_0"] == -1.5
    assert assignment["l_0_1"] == assignment["u_0_1"] == 1.5
    assert check_feasibility(build_mip(LINE, config), assignment) == []


def test_extract_keeps_boxes_with_positives() -> None:
    config = ExactBoxesConfig(k=2)
    mip = build_mip(LINE, config)
    model = BoxModel(boxes=(AxisBox(lower=(0.1,), upper=(0.45,)),), feature_names=("x",), units=UNITS_NORMALIZED)

    extracted = extract_model(mip, lift_solution(model, LINE, config))

    assert extracted == model


def test_read_solution_reports_line_numbers() -> None:
    assert read_solution("# comment\nx 1\n\ny -2.5\n") == {"x": 1.0, "y": -2.5}

    with pytest.raises(MipError, match="line 2"):
        read_solution("x 1\nbroken\n")
