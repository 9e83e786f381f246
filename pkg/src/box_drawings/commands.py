from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Sequence

from box_drawings.bounds import BoundInputs, generalization_bound
from box_drawings.box_logic import describe, predict_many
from box_drawings.config_store import (
    load_exact_config,
    load_fast_config,
    save_config_atomic,
    validate_exact_config,
    validate_fast_config,
)
from box_drawings.data_io import (
    load_csv,
    load_model,
    load_prediction_input,
    render_predictions_csv,
    save_model,
    write_dataset_csv,
    write_text_atomic,
)
from box_drawings.evaluation import DEFAULT_COSTS, Trainer, evaluate_cv, render_report_json, write_report
from box_drawings.exact_boxes import (
    DEFAULT_BUDGET,
    exact_trainer,
    objective_value,
    solve_exact_small,
    train_exact_boxes,
)
from box_drawings.fast_boxes import BoundaryTrace, fast_trainer, train_fast_boxes, write_trace_csv
from box_drawings.mip import (
    build_mip,
    check_feasibility,
    emit_lp,
    extract_model,
    lift_solution,
    load_solution,
    mip_objective,
    render_solution,
)
from box_drawings.model_selection import SelectingFastTrainer
from box_drawings.models import (
    UNITS_NORMALIZED,
    BoxModel,
    Dataset,
    ExactBoxesConfig,
    FastBoxesConfig,
    GridSearchSpace,
)
from box_drawings.normalization import apply_normalization, denormalize_model, normalize
from box_drawings.settings import Settings
from box_drawings.synthetic import generate_synthetic

LOGGER = logging.getLogger(__name__)

TRAINER_FAST = "fast"
TRAINER_EXACT = "exact"


@dataclass(frozen=True)
class RunConfig:
    command: str
    trainer: str
    fast: FastBoxesConfig
    exact: ExactBoxesConfig
    seed: int
    costs: tuple[float, ...]
    folds: int
    label_column: str
    positive_label: str
    budget: int
    decompose: bool
    workers: int


def parse_float_list(raw: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {raw!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def parse_int_list(raw: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in raw.split(",") if part.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {raw!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _overrides(args: argparse.Namespace, mapping: dict[str, str]) -> dict[str, Any]:
    return {field: getattr(args, flag) for flag, field in mapping.items() if getattr(args, flag, None) is not None}


def _fast_config(args: argparse.Namespace) -> FastBoxesConfig:
    config_path = getattr(args, "config", None)
    base = load_fast_config(config_path) if config_path and args.trainer == TRAINER_FAST else FastBoxesConfig()
    updates = _overrides(args, {"k": "k", "c": "c", "beta": "beta", "epsilon": "epsilon_expand", "seed": "kmeans_seed"})
    return validate_fast_config(replace(base, **updates))


def _exact_config(args: argparse.Namespace) -> ExactBoxesConfig:
    config_path = getattr(args, "config", None)
    base = load_exact_config(config_path) if config_path and args.trainer == TRAINER_EXACT else ExactBoxesConfig()
    updates = _overrides(args, {"k": "k", "ci": "c_i", "ce": "c_e", "margin": "margin", "big_m": "big_m"})
    return validate_exact_config(replace(base, **updates))


def build_run_config(args: argparse.Namespace) -> RunConfig:
    folds = getattr(args, "folds", 10)
    if folds < 2:
        raise ValueError("--folds must be >= 2")
    budget = getattr(args, "budget", DEFAULT_BUDGET)
    if budget < 1:
        raise ValueError("--budget must be >= 1")
    workers = getattr(args, "workers", 1)
    if workers < 1:
        raise ValueError("--workers must be >= 1")
    costs = tuple(getattr(args, "costs", None) or DEFAULT_COSTS)
    for cost in costs:
        if not 0.0 < cost <= 1.0:
            raise ValueError(f"--costs value {cost} is outside (0, 1]")

    return RunConfig(
        command=args.command,
        trainer=getattr(args, "trainer", TRAINER_FAST),
        fast=_fast_config(args),
        exact=_exact_config(args),
        seed=getattr(args, "seed", None) or 0,
        costs=costs,
        folds=folds,
        label_column=args.label_column,
        positive_label=args.positive_label,
        budget=budget,
        decompose=getattr(args, "decompose", False),
        workers=workers,
    )


def _trainer(run: RunConfig) -> Trainer:
    if run.trainer == TRAINER_EXACT:
        return exact_trainer(run.exact, budget=run.budget, decompose=run.decompose, kmeans_seed=run.seed)
    return fast_trainer(run.fast, max_workers=run.workers)


def _objective_weights(run: RunConfig) -> tuple[float, float]:
    if run.trainer == TRAINER_EXACT:
        return run.exact.c_i, run.exact.c_e
    return run.fast.c, 0.0


def _original_units(model: BoxModel) -> BoxModel:
    if model.units == UNITS_NORMALIZED and model.norm is not None:
        return denormalize_model(model, model.norm)
    return model


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    run = build_run_config(args)
    if args.trace is not None and run.trainer != TRAINER_FAST:
        raise ValueError("--trace is only available for the fast trainer")
    data = load_csv(args.data, run.label_column, run.positive_label)

    trace: list[BoundaryTrace] = []
    if run.trainer == TRAINER_EXACT:
        model = train_exact_boxes(data, run.exact, budget=run.budget, decompose=run.decompose, kmeans_seed=run.seed)
    else:
        model = train_fast_boxes(data, run.fast, trace=trace, max_workers=run.workers)

    save_model(args.model, model)
    if args.trace is not None:
        write_trace_csv(args.trace, trace)
    if args.save_config is not None:
        save_config_atomic(args.save_config, run.exact if run.trainer == TRAINER_EXACT else run.fast)

    predictions = predict_many(model, data.features)
    true_positives = int(((predictions == 1) & data.positive_mask).sum())
    true_negatives = int(((predictions == -1) & data.negative_mask).sum())
    c_i, c_e = _objective_weights(run)
    objective = objective_value(model, data, c_i, c_e)
    LOGGER.info("trained %s boxes with the %s trainer", model.k, run.trainer)

    print(f"boxes: {model.k}")
    print(f"positive accuracy: {true_positives}/{data.positive_count} ({true_positives / data.positive_count:.6f})")
    print(f"negative accuracy: {true_negatives}/{data.negative_count} ({true_negatives / data.negative_count:.6f})")
    print(f"objective: {objective:.10g}")
    return 0


def cmd_predict(args: argparse.Namespace, settings: Settings) -> int:
    model = load_model(args.model)
    frame, features = load_prediction_input(args.data, model.feature_names)
    if model.units == UNITS_NORMALIZED and model.norm is not None and features.shape[0]:
        features = apply_normalization(features, model.norm)
    predictions = predict_many(model, features)
    text = render_predictions_csv(frame, predictions)

    if args.out is None:
        sys.stdout.write(text)
    else:
        write_text_atomic(args.out, text)
    return 0


def cmd_describe(args: argparse.Namespace, settings: Settings) -> int:
    print(describe(_original_units(load_model(args.model))))
    return 0


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    run = build_run_config(args)
    data = load_csv(args.data, run.label_column, run.positive_label)

    trainer = _trainer(run)
    if args.select:
        if run.trainer != TRAINER_FAST:
            raise ValueError("--select tunes the fast trainer only")
        grid = GridSearchSpace(
            k_values=args.grid_k or GridSearchSpace().k_values,
            beta_values=args.grid_beta or GridSearchSpace().beta_values,
        )
        trainer = SelectingFastTrainer(grid, run.fast, costs=run.costs, seed=run.seed)

    report = evaluate_cv(data, trainer, run.costs, run.folds, run.seed, max_workers=run.workers)
    LOGGER.info("mean AUH %.4f (std %.4f)", report.mean, report.std)

    if args.out is None:
        sys.stdout.write(render_report_json(report))
    else:
        write_report(report, args.out, points_path=args.points, hull_path=args.hull)
    return 0


def _normalized_for_mip(args: argparse.Namespace) -> tuple[Dataset, RunConfig]:
    run = build_run_config(args)
    data = load_csv(args.data, run.label_column, run.positive_label)
    normalized, _ = normalize(data)
    return normalized, run


def cmd_emit_lp(args: argparse.Namespace, settings: Settings) -> int:
    normalized, run = _normalized_for_mip(args)
    cap = args.cap if args.cap is not None else settings.lp_cell_cap
    mip = build_mip(normalized, run.exact, cell_cap=cap)
    emit_lp(mip, args.lp)

    if args.warm_start is not None:
        solution = solve_exact_small(normalized, run.exact, run.budget)
        write_text_atomic(args.warm_start, render_solution(mip, lift_solution(solution.model, normalized, run.exact)))

    print(f"continuous variables: {len(mip.continuous)}")
    print(f"binary variables: {len(mip.binary)}")
    print(f"constraints: {len(mip.constraints)}")
    return 0


def cmd_import_solution(args: argparse.Namespace, settings: Settings) -> int:
    data = load_csv(args.data, args.label_column, args.positive_label)
    normalized, params = normalize(data)
    run = build_run_config(args)
    mip = build_mip(normalized, run.exact, cell_cap=settings.lp_cell_cap)

    assignment = load_solution(args.solution)
    violations = check_feasibility(mip, assignment)
    if violations:
        for violation in violations[:20]:
            print(f"violated {violation.name}: {violation.lhs:.10g} > {violation.rhs:.10g}", file=sys.stderr)
        raise ValueError(f"solution violates {len(violations)} constraints")

    model = denormalize_model(extract_model(mip, assignment), params)
    save_model(args.model, model)
    print(f"boxes: {model.k}")
    print(f"objective: {objective_value(model, data, run.exact.c_i, run.exact.c_e):.10g}")
    print(f"mip objective: {mip_objective(mip, assignment):.10g}")
    return 0


def cmd_bound(args: argparse.Namespace, settings: Settings) -> int:
    inputs = BoundInputs(k=args.k, grid_sizes=args.grid, m=args.m, delta=args.delta)
    print(f"{generalization_bound(inputs):.17g}")
    return 0


def cmd_generate(args: argparse.Namespace, settings: Settings) -> int:
    data = generate_synthetic(args.shape, args.m, args.ratio, args.seed)
    write_dataset_csv(args.out, data, label_column=args.label_column, positive_label=args.positive_label)
    print(f"wrote {data.m} rows ({data.positive_count} positive) to {args.out}")
    return 0


def _add_data_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--label-column", default="class")
    parser.add_argument("--positive-label", default="positive")


def _add_trainer_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trainer", choices=[TRAINER_FAST, TRAINER_EXACT], default=TRAINER_FAST)
    parser.add_argument("--config", type=Path, help="JSON or TOML trainer config; flags override it")
    parser.add_argument("--k", type=int)
    parser.add_argument("--c", type=float, help="majority weight of the fast trainer")
    parser.add_argument("--beta", type=float)
    parser.add_argument("--epsilon", type=float)
    _add_exact_flags(parser)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--decompose", action="store_true", help="solve one box per cluster (exact trainer)")
    parser.add_argument("--workers", type=int, default=1)


def _add_exact_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ci", type=float, help="majority weight of the exact trainer")
    parser.add_argument("--ce", type=float, help="per-box penalty of the exact trainer")
    parser.add_argument("--margin", type=float)
    parser.add_argument("--big-m", type=float)
    parser.add_argument("--budget", type=int, default=DEFAULT_BUDGET)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="box-drawings", description="Union-of-boxes classifiers for rare positive classes")
    subparsers = parser.add_subparsers(dest="command", required=True)

    train = subparsers.add_parser("train", help="train a model and write it as JSON")
    train.add_argument("data", type=Path)
    train.add_argument("model", type=Path)
    train.add_argument("--trace", type=Path, help="write the per-boundary trace CSV")
    train.add_argument("--save-config", type=Path, help="write the effective trainer config as JSON")
    _add_trainer_flags(train)
    _add_data_flags(train)
    train.set_defaults(handler=cmd_train)

    predict = subparsers.add_parser("predict", help="append predictions to a CSV")
    predict.add_argument("model", type=Path)
    predict.add_argument("data", type=Path)
    predict.add_argument("--out", type=Path)
    predict.set_defaults(handler=cmd_predict)

    describe_parser = subparsers.add_parser("describe", help="print a model as rules")
    describe_parser.add_argument("model", type=Path)
    describe_parser.set_defaults(handler=cmd_describe)

    evaluate = subparsers.add_parser("eval", help="cross-validated AUH of a trainer")
    evaluate.add_argument("data", type=Path)
    evaluate.add_argument("--costs", type=parse_float_list)
    evaluate.add_argument("--folds", type=int, default=10)
    evaluate.add_argument("--out", type=Path, help="JSON report path (stdout when omitted)")
    evaluate.add_argument("--points", type=Path, help="per fold and cost confusion counts CSV")
    evaluate.add_argument("--hull", type=Path, help="pooled hull vertices CSV")
    evaluate.add_argument("--select", action="store_true", help="tune K and beta inside every training split")
    evaluate.add_argument("--grid-k", type=parse_int_list)
    evaluate.add_argument("--grid-beta", type=parse_float_list)
    _add_trainer_flags(evaluate)
    _add_data_flags(evaluate)
    evaluate.set_defaults(handler=cmd_eval)

    emit = subparsers.add_parser("emit-lp", help="write the Exact Boxes MIP as an LP file")
    emit.add_argument("data", type=Path)
    emit.add_argument("lp", type=Path)
    emit.add_argument("--k", type=int)
    emit.add_argument("--cap", type=int, help="largest m*n*K to materialize")
    emit.add_argument("--warm-start", type=Path, help="also write the built-in solver's solution")
    _add_exact_flags(emit)
    _add_data_flags(emit)
    emit.set_defaults(handler=cmd_emit_lp, trainer=TRAINER_EXACT)

    imported = subparsers.add_parser("import-solution", help="check an external MIP solution and save its model")
    imported.add_argument("data", type=Path)
    imported.add_argument("solution", type=Path)
    imported.add_argument("model", type=Path)
    imported.add_argument("--k", type=int)
    _add_exact_flags(imported)
    _add_data_flags(imported)
    imported.set_defaults(handler=cmd_import_solution, trainer=TRAINER_EXACT)

    bound = subparsers.add_parser("bound", help="generalization bound of a box drawing class")
    bound.add_argument("--k", type=int, required=True)
    bound.add_argument("--m", type=int, required=True)
    bound.add_argument("--delta", type=float, required=True)
    bound.add_argument("--grid", type=parse_int_list, required=True, help="comma-separated grid sizes, one per feature")
    bound.set_defaults(handler=cmd_bound)

    generate = subparsers.add_parser("generate", help="write a synthetic 2-D dataset")
    generate.add_argument("--shape", required=True)
    generate.add_argument("--m", type=int, required=True)
    generate.add_argument("--ratio", type=float, required=True)
    generate.add_argument("--seed", type=int, default=0)
    generate.add_argument("--out", type=Path, required=True)
    _add_data_flags(generate)
    generate.set_defaults(handler=cmd_generate)

    return parser


def run_command(argv: Sequence[str] | None, settings: Settings) -> int:
    args = build_parser().parse_args(argv)
    return args.handler(args, settings)
