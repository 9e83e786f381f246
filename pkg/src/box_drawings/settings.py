from __future__ import annotations

import logging
import os
from dataclasses import dataclass

DEFAULT_LOG_LEVEL = "INFO"
DEFAULT_LP_CELL_CAP = 200_000


@dataclass(frozen=True)
class Settings:
    log_level: int
    lp_cell_cap: int


def _optional_env(name: str, default: str) -> str:
    value = os.getenv(name)
    if value is None or not value.strip():
        return default
    return value.strip()


def _parse_log_level(raw: str) -> int:
    level = logging.getLevelName(raw.upper())
    if not isinstance(level, int):
        raise ValueError(f"Invalid BOX_DRAWINGS_LOG_LEVEL: {raw}")
    return level


def load_settings() -> Settings:
    log_level = _parse_log_level(_optional_env("BOX_DRAWINGS_LOG_LEVEL", DEFAULT_LOG_LEVEL))

    raw_cap = _optional_env("BOX_DRAWINGS_LP_CELL_CAP", str(DEFAULT_LP_CELL_CAP))
    try:
        lp_cell_cap = int(raw_cap)
    except ValueError as exc:
        raise ValueError(f"Invalid BOX_DRAWINGS_LP_CELL_CAP: {raw_cap}") from exc
    if lp_cell_cap < 1:
        raise ValueError("BOX_DRAWINGS_LP_CELL_CAP must be >= 1")

    return Settings(log_level=log_level, lp_cell_cap=lp_cell_cap)
