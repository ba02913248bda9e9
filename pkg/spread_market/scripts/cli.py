"""Useful CLI tools for the spread_market package."""

import sys
from functools import wraps
from typing import Optional, Sequence

import click

from spread_market import __version__
from spread_market.config import ConfigError, RunConfig, load_config
from spread_market.pipeline import StageError, run_pipeline
from spread_market.pipeline.stage import EXIT_CONFIG

from .init_project import init_project

CONTEXT_SETTINGS = {"help_option_names": ["-h", "--help"]}

#: command-line flag -> config key
_FLAG_KEYS = {
    "gamma": "gamma",
    "lambda_": "lambda",
    "delta": "delta",
    "z_window": "z_window",
    "ap_window": "ap_window",
    "max_lag": "max_lag",
    "horizons": "horizons",
    "seed": "seed",
    "split_date": "split_date",
    "out": "output_dir",
    "jobs": "jobs",
}


@click.group("cli", context_settings=CONTEXT_SETTINGS)
def cli():
    """Coronavirus spread networks against the stock market."""
    click.echo(
        rf"""  ___ _ __  _ __ ___  __ _  __| |  _ __ ___   __ _ _ __| | _____| |_
 / __| '_ \| '__/ _ \/ _` |/ _` | | '_ ` _ \ / _` | '__| |/ / _ \ __|
 \__ \ |_) | | |  __/ (_| | (_| | | | | | | | (_| | |  |   <  __/ |_
 |___/ .__/|_|  \___|\__,_|\__,_| |_| |_| |_|\__,_|_|  |_|\_\___|\__|
     |_|
----  spread_market v{__version__}  ----
    """
    )


def run_options(func):
    """The config file and the flags that override it."""
    options = [
        click.option("-c", "--config", "config_file", type=click.Path(dir_okay=False), default=None,
                     help="Config file (default: $SPREAD_MARKET_CONFIG, then ./config.toml)."),
        click.option("--gamma", type=int, default=None, help="Node threshold on daily cases."),
        click.option("--lambda", "lambda_", type=int, default=None, help="Edge threshold on daily cases."),
        click.option("--delta", type=float, default=None, help="Edge radius in miles."),
        click.option("--z-window", type=int, default=None, help="Trailing window of the covariate z-scores."),
        click.option("--ap-window", type=int, default=None, help="Trailing window of the abnormal price."),
        click.option("--max-lag", type=int, default=None, help="Largest lag of correlations and Granger tests."),
        click.option("--horizons", type=str, default=None, help="Forecast horizons, e.g. 1,2,3."),
        click.option("--seed", type=int, default=None, help="Random-forest seed."),
        click.option("--split-date", type=str, default=None, help="First test date of the forecasts."),
        click.option("--out", type=click.Path(file_okay=False), default=None, help="Output folder."),
        click.option("--jobs", type=int, default=None, help="Maximum number of worker processes."),
    ]
    for option in reversed(options):
        func = option(func)

    @wraps(func)
    def wrapper(config_file, **flags):
        overrides = {_FLAG_KEYS[k]: flags.pop(k) for k in list(flags) if k in _FLAG_KEYS}
        return func(_load(config_file, overrides), **flags)

    return wrapper


def _load(config_file: Optional[str], overrides: dict) -> RunConfig:
    try:
        return load_config(config_file, overrides)
    except (ConfigError, FileNotFoundError) as exc:
        click.echo(f"config error: {exc}", err=True)
        sys.exit(EXIT_CONFIG)


def _run(config: RunConfig, stages: Optional[Sequence[str]] = None):
    try:
        manifest = run_pipeline(config, stages)
    except StageError as exc:
        click.echo(str(exc), err=True)
        sys.exit(exc.exit_code)
    for stage in manifest.stages:
        click.echo(f"{stage.name:<10} {stage.seconds:8.2f}s  {', '.join(f'{k}={v}' for k, v in stage.rows.items())}")
    click.echo(f"Artifacts written to {config.output_dir}")


@cli.command("init", short_help="Init project folder with default configuration")
@click.option("--synthetic", is_flag=True, default=False, help="Write a synthetic data bundle and its config.")
@click.option("--seed", type=int, default=0, help="Seed of the synthetic bundle.")
def init_cli(synthetic: bool, seed: int):
    """Init project folder with default configuration."""
    if init_project(synthetic=synthetic, seed=seed):
        click.echo("Done")
    else:
        click.echo("Stopped")


@cli.command("run", short_help="Run every stage")
@run_options
def run_cli(config: RunConfig):
    """Run every stage: ingest, network, motifs, transform, correlate, granger, forecast and egarch."""
    _run(config)


@cli.command("network", short_help="Build the daily spread networks")
@run_options
def network_cli(config: RunConfig):
    """Build the daily spread networks and write their features and dumps."""
    _run(config, ["network"])


@cli.command("motifs", short_help="Census the motifs of the dumped networks")
@run_options
def motifs_cli(config: RunConfig):
    """Census the triads and tetrads of the networks written by ``network``."""
    _run(config, ["motifs"])


@cli.command("transform", short_help="Write the standardized series")
@run_options
def transform_cli(config: RunConfig):
    """Write abnormal price, returns, volatility and standardized covariates on trading days."""
    _run(config, ["transform"])


@cli.command("correlate", short_help="Lagged Spearman correlations")
@run_options
def correlate_cli(config: RunConfig):
    """Lagged Spearman correlations of every covariate with the abnormal price."""
    _run(config, ["correlate"])


@cli.command("granger", short_help="Granger causality tests")
@run_options
def granger_cli(config: RunConfig):
    """Granger causality of every covariate on the abnormal price and on volatility."""
    _run(config, ["granger"])


@cli.command("forecast", short_help="Random-forest forecasts of the abnormal price")
@click.option("--models", type=str, default=None, help="Models to score against P0, e.g. P0,P3.")
@run_options
def forecast_cli(config: RunConfig, models: Optional[str]):
    """Random-forest forecasts of the abnormal price, scored against the P0 baseline."""
    if models is not None:
        try:
            config = RunConfig(**{**config.dict(), "models": models})
        except ValueError as exc:
            click.echo(f"config error: {exc}", err=True)
            sys.exit(EXIT_CONFIG)
    _run(config, ["forecast"])


@cli.command("egarch", short_help="EGARCH volatility models")
@run_options
def egarch_cli(config: RunConfig):
    """EGARCH(1, 1) of the index returns without and with the lagged covariates."""
    _run(config, ["egarch"])
