from pathlib import Path

import pytest

from box_drawings.config_store import (
    ConfigError,
    exact_config_from_dict,
    fast_config_from_dict,
    load_exact_config,
    load_fast_config,
    save_config_atomic,
)
from box_drawings.models import NEGATIVES_ALL_OUT_OF_CLUSTER, ExactBoxesConfig, FastBoxesConfig


def test_roundtrip_fast_config(tmp_path: Path) -> None:
    path = tmp_path / "fast.json"
    config = FastBoxesConfig(k=3, c=0.25, beta=0.1, kmeans_seed=7, negatives_for_discrimination=NEGATIVES_ALL_OUT_OF_CLUSTER)

    save_config_atomic(path, config)
    loaded = load_fast_config(path)

    assert loaded == config


def test_roundtrip_exact_config(tmp_path: Path) -> None:
    path = tmp_path / "exact.json"
    config = ExactBoxesConfig(k=2, c_i=0.5, c_e=0.1)

    save_config_atomic(path, config)

    assert load_exact_config(path) == config


def test_toml_config(tmp_path: Path) -> None:
    path = tmp_path / "fast.toml"
    path.write_text(
        """
k = 2
c = 0.5
beta = 0.01
final_expansion = false
""".strip()
        + "\n",
        encoding="utf-8",
    )

    config = load_fast_config(path)

    assert (config.k, config.c, config.beta, config.final_expansion) == (2, 0.5, 0.01, False)


def test_invalid_cost_rejected(tmp_path: Path) -> None:
    path = tmp_path / "fast.json"
    path.write_text('{"c": 1.5}', encoding="utf-8")

    with pytest.raises(ValueError):
        load_fast_config(path)


def test_unknown_key_rejected() -> None:
    with pytest.raises(ConfigError, match="unknown config keys: gamma"):
        fast_config_from_dict({"gamma": 1})


def test_boolean_is_not_an_integer() -> None:
    with pytest.raises(ConfigError, match="k must be an integer"):
        fast_config_from_dict({"k": True})


def test_unknown_negative_mode_rejected() -> None:
    with pytest.raises(ConfigError):
        fast_config_from_dict({"negatives_for_discrimination": "everyone"})


def test_big_m_must_exceed_diameter() -> None:
    with pytest.raises(ConfigError, match="big_m"):
        exact_config_from_dict({"big_m": 2.0})

    assert exact_config_from_dict({"big_m": 2.5, "margin": 0.1}).big_m == 2.5


def test_exact_weights_validated() -> None:
    with pytest.raises(ConfigError):
        exact_config_from_dict({"c_i": 0.0})
    with pytest.raises(ConfigError):
        exact_config_from_dict({"c_e": -1.0})


def test_missing_config_file(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_fast_config(tmp_path / "absent.json")
