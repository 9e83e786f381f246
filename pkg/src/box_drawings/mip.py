"""Mixed-integer formulation of Exact Boxes and its LP text form.

Variable names use 0-based indices: ``l_j_k``/``u_j_k`` are the boundaries
of box k in feature j, ``lt_i_j_k``/``ut_i_j_k`` the per-boundary indicators
of example i, ``w_i_k`` its box membership indicator and ``z_i`` whether it
is classified correctly. Every constraint is stored as ``sum(coef * var) <= rhs``.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from box_drawings.data_io import write_text_atomic
from box_drawings.models import UNITS_NORMALIZED, AxisBox, BoxModel, Dataset, ExactBoxesConfig

LOGGER = logging.getLogger(__name__)

NORMALIZED_TOLERANCE = 1e-9
FEASIBILITY_TOLERANCE = 1e-9
# Unused box slots sit above the normalized cube, covering nothing.
PARKED_BOUNDARY = 1.5

_SOLUTION_LINE = re.compile(r"^\s*(\S+)\s+(\S+)\s*$")


class MipError(ValueError):
    pass


@dataclass(frozen=True)
class LinearConstraint:
    name: str
    family: int
    terms: tuple[tuple[str, float], ...]
    rhs: float

    def lhs(self, assignment: Mapping[str, float]) -> float:
        return math.fsum(coef * assignment[var] for var, coef in self.terms)


@dataclass(frozen=True)
class MipModel:
    continuous: tuple[str, ...]
    binary: tuple[str, ...]
    constraints: tuple[LinearConstraint, ...]
    objective: tuple[tuple[str, float], ...]
    objective_constant: float
    labels: tuple[int, ...]
    n: int
    k: int
    feature_names: tuple[str, ...]

    @property
    def m(self) -> int:
        return len(self.labels)

    @property
    def variables(self) -> tuple[str, ...]:
        return self.continuous + self.binary


@dataclass(frozen=True)
class Violation:
    name: str
    family: int
    lhs: float
    rhs: float


def _l(j: int, k: int) -> str:
    return f"l_{j}_{k}"


def _u(j: int, k: int) -> str:
    return f"u_{j}_{k}"


def _lt(i: int, j: int, k: int) -> str:
    return f"lt_{i}_{j}_{k}"


def _ut(i: int, j: int, k: int) -> str:
    return f"ut_{i}_{j}_{k}"


def _w(i: int, k: int) -> str:
    return f"w_{i}_{k}"


def _z(i: int) -> str:
    return f"z_{i}"


def check_size(m: int, n: int, k: int, cell_cap: int | None) -> None:
    cells = m * n * k
    if cell_cap is not None and cells > cell_cap:
        raise MipError(f"LP size m*n*K = {cells} exceeds the cap of {cell_cap}")


def minimum_gap(features: np.ndarray) -> float:
    """Smallest distance between consecutive distinct values of any feature."""
    gaps: list[float] = []
    for column in np.asarray(features, dtype=float).T:
        values = np.unique(column)
        if values.size > 1:
            gaps.append(float(np.min(np.diff(values))))
    return min(gaps) if gaps else math.inf


def require_normalized_features(features: np.ndarray) -> None:
    values = np.asarray(features, dtype=float)
    if values.size and float(np.max(np.abs(values))) > 1.0 + NORMALIZED_TOLERANCE:
        raise MipError("MIP data must be normalized to [-1, 1]")


def warn_on_margin(features: np.ndarray, margin: float) -> None:
    gap = minimum_gap(features)
    if margin >= gap / 2.0:
        LOGGER.warning("Margin %s is not below half the minimum feature gap (%s); grid solutions may not lift", margin, gap / 2.0)


def _positive_rows(i: int, x: np.ndarray, k: int, config: ExactBoxesConfig) -> list[LinearConstraint]:
    big_m, v, eps = config.big_m, config.margin, config.eps_strict
    rows: list[LinearConstraint] = []
    for j, value in enumerate(x):
        lt, ut, low, high = _lt(i, j, k), _ut(i, j, k), _l(j, k), _u(j, k)
        rows.append(LinearConstraint(f"c5_{i}_{j}_{k}", 5, ((low, -1.0), (lt, -big_m)), v - value))
        rows.append(LinearConstraint(f"c6_{i}_{j}_{k}", 6, ((lt, big_m), (low, 1.0)), value - v + big_m - eps))
        rows.append(LinearConstraint(f"c7_{i}_{j}_{k}", 7, ((high, 1.0), (ut, -big_m)), v + value))
        rows.append(LinearConstraint(f"c8_{i}_{j}_{k}", 8, ((ut, big_m), (high, -1.0)), -value - v + big_m - eps))
    return rows


def _negative_rows(i: int, x: np.ndarray, k: int, config: ExactBoxesConfig) -> list[LinearConstraint]:
    big_m, v, eps = config.big_m, config.margin, config.eps_strict
    rows: list[LinearConstraint] = []
    for j, value in enumerate(x):
        lt, ut, low, high = _lt(i, j, k), _ut(i, j, k), _l(j, k), _u(j, k)
        rows.append(LinearConstraint(f"c13_{i}_{j}_{k}", 13, ((low, 1.0), (lt, -big_m)), v + value))
        rows.append(LinearConstraint(f"c14_{i}_{j}_{k}", 14, ((lt, big_m), (low, -1.0)), -v - value + big_m - eps))
        rows.append(LinearConstraint(f"c15_{i}_{j}_{k}", 15, ((high, -1.0), (ut, -big_m)), v - value))
        rows.append(LinearConstraint(f"c16_{i}_{j}_{k}", 16, ((ut, big_m), (high, 1.0)), value - v + big_m - eps))
    return rows


def _indicator_terms(i: int, n: int, k: int, coef: float) -> list[tuple[str, float]]:
    terms: list[tuple[str, float]] = []
    for j in range(n):
        terms.append((_lt(i, j, k), coef))
        terms.append((_ut(i, j, k), coef))
    return terms


def build_mip(data: Dataset, config: ExactBoxesConfig, *, cell_cap: int | None = None) -> MipModel:
    require_normalized_features(data.features)
    check_size(data.m, data.n, config.k, cell_cap)
    warn_on_margin(data.features, config.margin)

    n, boxes = data.n, config.k
    continuous = tuple(name for k in range(boxes) for j in range(n) for name in (_l(j, k), _u(j, k)))
    binary: list[str] = []
    constraints: list[LinearConstraint] = []
    objective: list[tuple[str, float]] = []

    for i, (x, label) in enumerate(zip(data.features, data.labels)):
        for k in range(boxes):
            for j in range(n):
                binary.extend((_lt(i, j, k), _ut(i, j, k)))
        binary.extend(_w(i, k) for k in range(boxes))
        binary.append(_z(i))

        memberships = [(_w(i, k), 1.0) for k in range(boxes)]
        if label == 1:
            for k in range(boxes):
                constraints.extend(_positive_rows(i, x, k, config))
                constraints.append(
                    LinearConstraint(f"c9_{i}_{k}", 9, (*_indicator_terms(i, n, k, 1.0), (_w(i, k), -1.0)), 2.0 * n - 1.0)
                )
                constraints.append(
                    LinearConstraint(f"c10_{i}_{k}", 10, ((_w(i, k), 2.0 * n), *_indicator_terms(i, n, k, -1.0)), 0.0)
                )
            constraints.append(LinearConstraint(f"c11_{i}", 11, (*memberships, (_z(i), -float(boxes))), 0.0))
            constraints.append(LinearConstraint(f"c12_{i}", 12, ((_z(i), 1.0), *[(w, -1.0) for w, _ in memberships]), 0.0))
            objective.append((_z(i), 1.0))
        else:
            for k in range(boxes):
                constraints.extend(_negative_rows(i, x, k, config))
                constraints.append(
                    LinearConstraint(
                        f"c17_{i}_{k}", 17, (*_indicator_terms(i, n, k, 1.0), (_w(i, k), 2.0 * n)), 4.0 * n - 1.0
                    )
                )
                constraints.append(
                    LinearConstraint(f"c18_{i}_{k}", 18, (*_indicator_terms(i, n, k, -1.0), (_w(i, k), -1.0)), -1.0)
                )
            constraints.append(LinearConstraint(f"c19_{i}", 19, (*memberships, (_z(i), float(boxes))), float(boxes)))
            constraints.append(LinearConstraint(f"c20_{i}", 20, (*[(w, -1.0) for w, _ in memberships], (_z(i), -1.0)), -1.0))
            objective.append((_z(i), config.c_i))

    for k in range(boxes):
        for j in range(n):
            constraints.append(LinearConstraint(f"c21_{j}_{k}", 21, ((_l(j, k), 1.0), (_u(j, k), -1.0)), 0.0))

    mip = MipModel(
        continuous=continuous,
        binary=tuple(binary),
        constraints=tuple(constraints),
        objective=tuple(objective),
        objective_constant=-config.c_e * boxes,
        labels=tuple(int(label) for label in data.labels),
        n=n,
        k=boxes,
        feature_names=data.feature_names,
    )
    LOGGER.info(
        "built MIP: %s continuous, %s binary, %s constraints",
        len(mip.continuous),
        len(mip.binary),
        len(mip.constraints),
    )
    return mip


def _format_terms(terms: tuple[tuple[str, float], ...]) -> str:
    return " ".join(f"{coef:+.17g} {var}" for var, coef in terms)


def render_lp(mip: MipModel) -> str:
    lines = [
        f"\\* Exact Boxes model m={mip.m} n={mip.n} K={mip.k} *\\",
        f"\\* objective constant {mip.objective_constant:+.17g} *\\",
        "Maximize",
        f" obj: {_format_terms(mip.objective)}".rstrip(),
    ]
    if mip.constraints:
        lines.append("Subject To")
        for row in mip.constraints:
            lines.append(f" {row.name}: {_format_terms(row.terms)} <= {row.rhs:.17g}")
    if mip.continuous:
        lines.append("Bounds")
        lines.extend(f" {name} free" for name in mip.continuous)
    if mip.binary:
        lines.append("Binary")
        lines.extend(f" {name}" for name in mip.binary)
    lines.append("End")
    return "\n".join(lines) + "\n"


def emit_lp(mip: MipModel, path: Path) -> None:
    write_text_atomic(path, render_lp(mip))


@dataclass(frozen=True)
class LpSummary:
    rows: tuple[str, ...]
    variables: tuple[str, ...]


def parse_lp(text: str) -> LpSummary:
    """Row names and declared variables of an LP file written by render_lp."""
    rows: list[str] = []
    variables: list[str] = []
    section = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\*"):
            continue
        if line in {"Maximize", "Subject To", "Bounds", "Binary", "End"}:
            section = line
            continue
        if section == "Subject To":
            rows.append(line.split(":", 1)[0])
        elif section == "Bounds":
            variables.append(line.split()[0])
        elif section == "Binary":
            variables.append(line)
    return LpSummary(rows=tuple(rows), variables=tuple(variables))


def read_solution(text: str) -> dict[str, float]:
    """Parse "var value" lines; blank lines and lines starting with # are skipped."""
    assignment: dict[str, float] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _SOLUTION_LINE.match(line)
        if match is None:
            raise MipError(f"Solution line {number}: expected 'name value', got {raw!r}")
        name, value = match.groups()
        try:
            assignment[name] = float(value)
        except ValueError as exc:
            raise MipError(f"Solution line {number}: cannot parse value {value!r}") from exc
    return assignment


def load_solution(path: Path) -> dict[str, float]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Solution file not found: {path}")
    return read_solution(path.read_text(encoding="utf-8"))


def render_solution(mip: MipModel, assignment: Mapping[str, float]) -> str:
    return "".join(f"{name} {assignment[name]:.17g}\n" for name in mip.variables)


def _require_assignment(mip: MipModel, assignment: Mapping[str, float]) -> None:
    missing = [name for name in mip.variables if name not in assignment]
    if missing:
        raise MipError(f"assignment is missing variable {missing[0]} ({len(missing)} missing)")
    for name in mip.binary:
        if assignment[name] not in (0.0, 1.0):
            raise MipError(f"binary variable {name} has value {assignment[name]}")


def check_feasibility(
    mip: MipModel, assignment: Mapping[str, float], *, tolerance: float = FEASIBILITY_TOLERANCE
) -> list[Violation]:
    _require_assignment(mip, assignment)
    violations: list[Violation] = []
    for row in mip.constraints:
        lhs = row.lhs(assignment)
        if lhs > row.rhs + tolerance:
            violations.append(Violation(name=row.name, family=row.family, lhs=lhs, rhs=row.rhs))
    return violations


def mip_objective(mip: MipModel, assignment: Mapping[str, float]) -> float:
    return math.fsum(coef * assignment[var] for var, coef in mip.objective) + mip.objective_constant


def _clip(value: float) -> float:
    return min(max(value, -PARKED_BOUNDARY), PARKED_BOUNDARY)


def lift_solution(model: BoxModel, data: Dataset, config: ExactBoxesConfig) -> dict[str, float]:
    """Full MIP assignment realizing a normalized box model on the given data.

    Unbounded sides are clipped to just outside the normalized cube and box
    slots beyond the model's boxes are parked where they cover nothing.
    """
    if model.units != data.units:
        raise MipError(f"unit mismatch: model is {model.units}, data is {data.units}")
    if model.k > config.k:
        raise MipError(f"model has {model.k} boxes but the MIP has {config.k} slots")

    v = config.margin
    lower = np.full((config.k, data.n), PARKED_BOUNDARY)
    upper = np.full((config.k, data.n), PARKED_BOUNDARY)
    for k, box in enumerate(model.boxes):
        lower[k] = [_clip(value) for value in box.lower]
        upper[k] = [_clip(value) for value in box.upper]

    assignment: dict[str, float] = {}
    for k in range(config.k):
        for j in range(data.n):
            assignment[_l(j, k)] = float(lower[k, j])
            assignment[_u(j, k)] = float(upper[k, j])

    for i, (x, label) in enumerate(zip(data.features, data.labels)):
        covered = False
        for k in range(config.k):
            if label == 1:
                lt = x > lower[k] + v
                ut = x < upper[k] - v
                inside = bool(np.all(lt) and np.all(ut))
            else:
                lt = lower[k] - v > x
                ut = upper[k] + v < x
                inside = not bool(np.any(lt) or np.any(ut))
            for j in range(data.n):
                assignment[_lt(i, j, k)] = float(lt[j])
                assignment[_ut(i, j, k)] = float(ut[j])
            assignment[_w(i, k)] = float(inside)
            covered = covered or inside
        correct = covered if label == 1 else not covered
        assignment[_z(i)] = float(correct)
    return assignment


def extract_model(mip: MipModel, assignment: Mapping[str, float]) -> BoxModel:
    """Boxes of an assignment that hold at least one positive example."""
    _require_assignment(mip, assignment)
    positives = [i for i, label in enumerate(mip.labels) if label == 1]
    boxes: list[AxisBox] = []
    for k in range(mip.k):
        if not any(assignment[_w(i, k)] == 1.0 for i in positives):
            continue
        boxes.append(
            AxisBox(
                lower=[assignment[_l(j, k)] for j in range(mip.n)],
                upper=[assignment[_u(j, k)] for j in range(mip.n)],
            )
        )
    return BoxModel(boxes=tuple(boxes), feature_names=mip.feature_names, units=UNITS_NORMALIZED)
