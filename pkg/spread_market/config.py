"""
This file contains the run configuration of the spread_market package.
It reads a flat toml file in which every key is one run setting.

An example of the toml file is as follows:

.. code-block:: toml

  cases = "data/us-counties.csv"
  geo = "data/county-centroids.csv"
  prices = "data/sp500.csv"
  trends = "data/trends.csv"
  gamma = 5
  lambda = 5
  delta = 100.0
  seed = 0
  output_dir = "output"

Relative paths are resolved against the folder of the config file. When no path is given, the file is taken
from the environment variable ``SPREAD_MARKET_CONFIG`` and falls back to ``config.toml`` in the current folder.
"""

import os
from datetime import date
from pathlib import Path
from types import MappingProxyType as FrozenDict
from typing import Any, Dict, Optional, Tuple, Union

import toml
from pydantic import BaseModel, Field, ValidationError, root_validator, validator

CONFIG_ENV = "SPREAD_MARKET_CONFIG"
PATH_KEYS = ("cases", "geo", "prices", "trends", "covid_totals", "output_dir")

DEFAULT_MODELS = ("P0", "P1", "P2", "P3", "P4")
DEFAULT_EGARCH_COVARIATES = ("us_total_deaths", "E", "T2", "Covid 19 US")


class ConfigError(ValueError):
    """The configuration file or a command-line override is invalid."""


def freeze_config(config_: Dict[str, Any]) -> FrozenDict:
    """
    Convert the config dict to frozen config.

    Args:
        config_: the dict of config data

    Returns
    -------
        frozen_config, which can not be modified
    """

    def _frozen_collection(collection_or_element):
        """Convert a list to tuple, a dict to frozen_dict recursively."""
        if isinstance(collection_or_element, list):
            return tuple(_frozen_collection(element) for element in collection_or_element)
        if isinstance(collection_or_element, dict):
            return FrozenDict({k: _frozen_collection(v) for k, v in collection_or_element.items()})

        return collection_or_element

    return _frozen_collection(config_)


def _split_list(v):
    if isinstance(v, str):
        return tuple(item.strip() for item in v.split(",") if item.strip())
    return v


class RunConfig(BaseModel):
    """Every setting of a run. Validated on construction and immutable afterwards."""

    cases: Path
    geo: Path
    prices: Path
    trends: Path
    covid_totals: Optional[Path] = None
    output_dir: Path = Path("output")

    start_date: date = date(2020, 1, 2)
    end_date: date = date(2020, 5, 29)

    gamma: int = 5
    lambda_: int = Field(5, alias="lambda")
    delta: float = 100.0
    case_basis: str = "new"
    census_method: str = "formula"
    dump_graphs: bool = True

    z_window: int = 7
    ap_window: int = 148
    max_lag: int = 7
    causality_alpha: float = 0.10
    correlation_alpha: float = 0.05

    horizons: Tuple[int, ...] = (1, 2, 3, 4, 5, 6)
    models: Tuple[str, ...] = DEFAULT_MODELS
    n_trees: int = 500
    mtry: Optional[int] = None
    min_leaf: int = 5
    seed: int
    split_date: date = date(2020, 3, 1)
    shift_by_horizon: bool = True

    egarch_covariates: Tuple[str, ...] = DEFAULT_EGARCH_COVARIATES
    egarch_lags: Tuple[int, ...] = (1, 2)
    egarch_max_iter: int = 2000

    jobs: int = 1

    class Config:
        allow_mutation = False
        allow_population_by_field_name = True
        extra = "forbid"

    @validator("horizons", "models", "egarch_covariates", "egarch_lags", pre=True)
    def comma_separated(cls, v):
        """Accept ``"1,2,3"`` as well as a list."""
        return _split_list(v)

    @validator("gamma", "lambda_")
    def at_least_one(cls, v, field):
        if v < 1:
            raise ValueError(f"{field.alias} must be at least 1, got {v}")
        return v

    @validator("delta")
    def positive_distance(cls, v):
        if not v > 0:
            raise ValueError(f"delta must be a positive number of miles, got {v}")
        return v

    @validator("z_window", "ap_window")
    def sample_window(cls, v, field):
        if v < 2:
            raise ValueError(f"{field.name} must be at least 2 for a sample standard deviation, got {v}")
        return v

    @validator("max_lag", "n_trees", "min_leaf", "jobs", "egarch_max_iter")
    def positive_integer(cls, v, field):
        if v < 1:
            raise ValueError(f"{field.name} must be a positive integer, got {v}")
        return v

    @validator("mtry")
    def positive_mtry(cls, v):
        if v is not None and v < 1:
            raise ValueError(f"mtry must be a positive integer, got {v}")
        return v

    @validator("horizons", "egarch_lags")
    def positive_offsets(cls, v, field):
        if not v or any(h < 1 for h in v):
            raise ValueError(f"{field.name} must be a non-empty list of positive integers")
        return tuple(sorted(set(v)))

    @validator("models")
    def known_models(cls, v):
        unknown = [m for m in v if m not in DEFAULT_MODELS]
        if not v or unknown:
            raise ValueError(f"models must be drawn from {', '.join(DEFAULT_MODELS)}; unknown: {unknown}")
        return tuple(dict.fromkeys(v))

    @validator("case_basis")
    def known_basis(cls, v):
        if v not in ("new", "cumulative"):
            raise ValueError(f"case_basis must be 'new' or 'cumulative', got {v!r}")
        return v

    @validator("census_method")
    def known_method(cls, v):
        if v not in ("formula", "enumerate"):
            raise ValueError(f"census_method must be 'formula' or 'enumerate', got {v!r}")
        return v

    @validator("causality_alpha", "correlation_alpha")
    def probability(cls, v, field):
        if not 0 < v < 1:
            raise ValueError(f"{field.name} must lie in (0, 1), got {v}")
        return v

    @root_validator(skip_on_failure=True)
    def ordered_dates(cls, values):
        """The analysis window must not be empty."""
        if values["start_date"] > values["end_date"]:
            raise ValueError("start_date must not be after end_date")
        return values

    def snapshot(self) -> FrozenDict:
        """The settings as a frozen, JSON-ready mapping (paths as strings, dates in ISO format)."""
        data = {}
        for key, value in self.dict(by_alias=True).items():
            if isinstance(value, Path):
                value = value.as_posix()
            elif isinstance(value, date):
                value = value.isoformat()
            elif isinstance(value, tuple):
                value = list(value)
            data[key] = value
        return freeze_config(data)

    @property
    def input_paths(self) -> Dict[str, Path]:
        """Input files by key, without the optional ones that are not set."""
        paths = {"cases": self.cases, "geo": self.geo, "prices": self.prices, "trends": self.trends}
        if self.covid_totals is not None:
            paths["covid_totals"] = self.covid_totals
        return paths


def _resolve(value: Any, base: Path) -> Any:
    if value is None:
        return None
    path = Path(value)
    return path if path.is_absolute() else (base / path)


def config_path(path: Optional[Union[str, Path]] = None) -> Path:
    """The config file to read: ``path``, else ``$SPREAD_MARKET_CONFIG``, else ``./config.toml``."""
    if path is not None:
        return Path(path)
    return Path(os.getenv(CONFIG_ENV, None) or "config.toml")


def load_config(
    path: Optional[Union[str, Path]] = None, overrides: Optional[Dict[str, Any]] = None
) -> RunConfig:
    """
    Load and validate a run configuration; ``overrides`` (command-line flags) win over file values.

    ``None`` overrides are ignored. Override paths are taken relative to the current folder.

    Raises
    ------
    FileNotFoundError
        The config file does not exist.
    ConfigError
        The file is not a flat toml document, a value is invalid or the output folder is not writable.
    """
    config_file = config_path(path)
    try:
        with open(config_file, encoding="utf-8") as f:
            _config = toml.load(f)
    except FileNotFoundError as exc:
        raise FileNotFoundError(
            f"Config file was not found at {config_file}. "
            f"Please set the environment variable '{CONFIG_ENV}' to the path to the config file. In "
            "absence of this environment variable, we assume there is a file named config.toml in the current "
            "directory."
        ) from exc
    except toml.TomlDecodeError as exc:
        raise ConfigError(f"Config file {config_file} is not valid toml: {exc}") from exc

    nested = [k for k, v in _config.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"Config file {config_file} must be flat; found table(s) {', '.join(nested)}.")

    base = config_file.absolute().parent
    _config.setdefault("output_dir", "output")
    data = {k: _resolve(v, base) if k in PATH_KEYS else v for k, v in _config.items()}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        data[key] = _resolve(value, Path.cwd()) if key in PATH_KEYS else value

    try:
        config = RunConfig(**data)
    except ValidationError as exc:
        raise ConfigError(f"Invalid configuration in {config_file}:\n{exc}") from exc

    try:
        config.output_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"Output folder {config.output_dir} cannot be created: {exc}") from exc
    if not os.access(config.output_dir, os.W_OK):
        raise ConfigError(f"Output folder {config.output_dir} is not writable.")
    return config
