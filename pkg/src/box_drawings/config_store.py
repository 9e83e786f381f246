from __future__ import annotations

import json
import math
import sys

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - Python 3.10 fallback
    import tomli as tomllib
from dataclasses import asdict, fields
from pathlib import Path
from typing import Any

from box_drawings.data_io import write_text_atomic
from box_drawings.models import (
    NEGATIVES_ALL_OUT_OF_CLUSTER,
    NEGATIVES_MAJORITY_ONLY,
    ExactBoxesConfig,
    FastBoxesConfig,
)

ALLOWED_NEGATIVE_MODES = {NEGATIVES_MAJORITY_ONLY, NEGATIVES_ALL_OUT_OF_CLUSTER}

# Normalized coordinates lie in [-1, 1].
NORMALIZED_DIAMETER = 2.0


class ConfigError(ValueError):
    pass


def _require_int(name: str, value: Any, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer")
    if value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}")
    return value


def _require_real(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number")
    result = float(value)
    if not math.isfinite(result):
        raise ConfigError(f"{name} must be finite")
    return result


def validate_fast_config(config: FastBoxesConfig) -> FastBoxesConfig:
    k = _require_int("k", config.k, 1)
    c = _require_real("c", config.c)
    if not 0.0 < c <= 1.0:
        raise ConfigError("c must be in (0, 1]")
    beta = _require_real("beta", config.beta)
    if beta < 0.0:
        raise ConfigError("beta must be >= 0")
    epsilon_expand = _require_real("epsilon_expand", config.epsilon_expand)
    if epsilon_expand <= 0.0:
        raise ConfigError("epsilon_expand must be > 0")
    r_minus_threshold = _require_real("r_minus_threshold", config.r_minus_threshold)
    if r_minus_threshold <= 0.0:
        raise ConfigError("r_minus_threshold must be > 0")

    mode = str(config.negatives_for_discrimination).strip().lower()
    if mode not in ALLOWED_NEGATIVE_MODES:
        raise ConfigError(f"negatives_for_discrimination must be one of {sorted(ALLOWED_NEGATIVE_MODES)}")

    return FastBoxesConfig(
        k=k,
        c=c,
        beta=beta,
        epsilon_expand=epsilon_expand,
        r_minus_threshold=r_minus_threshold,
        kmeans_seed=_require_int("kmeans_seed", config.kmeans_seed, 0),
        kmeans_restarts=_require_int("kmeans_restarts", config.kmeans_restarts, 1),
        kmeans_max_iter=_require_int("kmeans_max_iter", config.kmeans_max_iter, 1),
        negatives_for_discrimination=mode,
        final_expansion=bool(config.final_expansion),
    )


def validate_exact_config(config: ExactBoxesConfig) -> ExactBoxesConfig:
    k = _require_int("k", config.k, 1)
    c_i = _require_real("c_i", config.c_i)
    if not 0.0 < c_i <= 1.0:
        raise ConfigError("c_i must be in (0, 1]")
    c_e = _require_real("c_e", config.c_e)
    if c_e < 0.0:
        raise ConfigError("c_e must be >= 0")
    margin = _require_real("margin", config.margin)
    if margin < 0.0:
        raise ConfigError("margin must be >= 0")
    big_m = _require_real("big_m", config.big_m)
    if big_m <= NORMALIZED_DIAMETER + margin:
        raise ConfigError(f"big_m must exceed the normalized data diameter plus margin ({NORMALIZED_DIAMETER + margin})")
    eps_strict = _require_real("eps_strict", config.eps_strict)
    if eps_strict <= 0.0:
        raise ConfigError("eps_strict must be > 0")

    return ExactBoxesConfig(k=k, c_i=c_i, c_e=c_e, margin=margin, big_m=big_m, eps_strict=eps_strict)


def _read_config_payload(path: Path) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")

    if path.suffix.lower() == ".toml":
        with path.open("rb") as file_obj:
            data = tomllib.load(file_obj)
    else:
        with path.open("r", encoding="utf-8") as file_obj:
            data = json.load(file_obj)

    if not isinstance(data, dict):
        raise ConfigError("config file must contain a table/object at the top level")
    return data


def _build(config_type: type, data: dict[str, Any]) -> Any:
    known = {field.name for field in fields(config_type)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return config_type(**data)


def fast_config_from_dict(data: dict[str, Any]) -> FastBoxesConfig:
    return validate_fast_config(_build(FastBoxesConfig, data))


def exact_config_from_dict(data: dict[str, Any]) -> ExactBoxesConfig:
    return validate_exact_config(_build(ExactBoxesConfig, data))


def load_fast_config(path: Path) -> FastBoxesConfig:
    return fast_config_from_dict(_read_config_payload(path))


def load_exact_config(path: Path) -> ExactBoxesConfig:
    return exact_config_from_dict(_read_config_payload(path))


def render_config(config: FastBoxesConfig | ExactBoxesConfig) -> str:
    if isinstance(config, FastBoxesConfig):
        validated: Any = validate_fast_config(config)
    else:
        validated = validate_exact_config(config)
    return json.dumps(asdict(validated), indent=2) + "\n"


def save_config_atomic(path: Path, config: FastBoxesConfig | ExactBoxesConfig) -> None:
    write_text_atomic(path, render_config(config))
