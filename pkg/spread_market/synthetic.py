"""
A seeded synthetic input bundle in the exact ingest formats.

It is small enough for a full run in seconds and long enough for every stage: the EGARCH fits need 30 aligned
returns and the lag-7 Granger cells need 16 complete rows, so the default window is 70 calendar days.
"""

from datetime import date, timedelta
from pathlib import Path
from typing import Dict, List, Union

import numpy as np
import pandas as pd
import toml

from .ingest import (
    CountyDay,
    CountyGeo,
    write_county_cases_csv,
    write_covid_totals_csv,
    write_geo_csv,
    write_price_csv,
    write_trends_csv,
)
from .timeseries import CalendarKind, DailySeries
from .volatility import simulate_egarch

SYNTHETIC_START = date(2020, 1, 2)
SYNTHETIC_FILES = {
    "cases": "us-counties.csv",
    "geo": "county-centroids.csv",
    "prices": "sp500.csv",
    "trends": "trends.csv",
    "covid_totals": "covid-totals.csv",
}

#: EGARCH(1, 1) parameters of the synthetic index returns (mu, omega0, omega, gamma, tau)
_INDEX_PARAMS = (0.0003, -0.35, -0.08, 0.15, 0.96)
_QUERIES = ("Covid-19 US", "Covid 19 US", "Covid-19 World")


def _counties(rng: np.random.Generator, n_counties: int) -> List[CountyGeo]:
    latitudes = rng.uniform(39.0, 43.0, n_counties)
    longitudes = rng.uniform(-78.0, -72.0, n_counties)
    return [
        CountyGeo(fips=f"36{i * 2 + 1:03d}", latitude=round(float(a), 6), longitude=round(float(o), 6),
                  name=f"County {i + 1}", state="New York")
        for i, (a, o) in enumerate(zip(latitudes, longitudes))
    ]


def _cases(rng: np.random.Generator, geo: List[CountyGeo], days: List[date]) -> List[CountyDay]:
    """
    Cumulative counts whose daily increments grow slowly and skip reporting days at random.

    The set of counties with at least a handful of new cases changes every day, so the spread network never
    settles into one graph and every spread variable keeps some variance over any week.
    """
    t = np.arange(len(days))
    records = []
    for county in geo:
        scale = rng.uniform(0.5, 2.0)
        onset = int(rng.integers(0, 10))
        growth = rng.uniform(0.01, 0.04)
        rate = np.where(t >= onset, 3.0 * scale * np.exp(growth * (t - onset)), 0.0)
        reported = rng.random(len(days)) >= 0.3
        new = rng.poisson(rate * rng.lognormal(0.0, 0.5, len(days))) * reported
        cases = np.cumsum(new)
        deaths = np.cumsum(rng.binomial(new, 0.03))
        for day, c, d in zip(days, cases, deaths):
            if c > 0:
                records.append(CountyDay(day, county.fips, int(c), int(d), county.name, county.state))
    return records


def _totals(records: List[CountyDay], rng: np.random.Generator, days: List[date]) -> Dict[str, DailySeries]:
    table = pd.DataFrame([(r.date, r.cumulative_cases, r.cumulative_deaths) for r in records],
                         columns=["date", "cases", "deaths"])
    summed = table.groupby("date").sum().reindex(days, fill_value=0)
    us_cases = summed["cases"].to_numpy(dtype=float)
    us_deaths = summed["deaths"].to_numpy(dtype=float)
    t = np.arange(len(days))
    world_cases = np.cumsum(rng.poisson(200.0 * np.exp(0.03 * t))) + us_cases
    world_deaths = np.cumsum(rng.poisson(6.0 * np.exp(0.03 * t))) + us_deaths
    levels = {
        "us_total_cases": us_cases,
        "us_total_deaths": us_deaths,
        "world_total_cases": world_cases,
        "world_total_deaths": world_deaths,
    }
    totals = {}
    for name, values in levels.items():
        totals[name] = DailySeries(days, values, CalendarKind.CALENDAR, name)
        new_name = name.replace("total", "new")
        totals[new_name] = DailySeries(days, np.diff(values, prepend=0.0), CalendarKind.CALENDAR, new_name)
    return totals


def _trends(rng: np.random.Generator, days: List[date]) -> Dict[str, DailySeries]:
    t = np.arange(len(days))
    trends = {}
    for i, query in enumerate(_QUERIES):
        interest = 5.0 + 85.0 / (1.0 + np.exp(-(t - 40.0 - 3 * i) / 5.0)) + rng.normal(0.0, 2.0, len(days))
        trends[query] = DailySeries(days, np.clip(np.round(interest), 0, 100), CalendarKind.CALENDAR, query)
    return trends


def _prices(rng: np.random.Generator, end: date, history: int) -> DailySeries:
    trading = pd.bdate_range(SYNTHETIC_START - timedelta(days=int(history * 1.5)), end)
    returns, _ = simulate_egarch(_INDEX_PARAMS, len(trading), rng)
    closes = np.round(3200.0 * np.exp(np.cumsum(returns)), 2)
    return DailySeries(list(trading.date), closes, CalendarKind.TRADING, "close")


def write_synthetic_bundle(
    directory: Union[str, Path], n_days: int = 70, seed: int = 0, n_counties: int = 60
) -> Path:
    """
    Write the five input files and a ``config.toml`` pointing at them into ``directory``.

    Returns the path of the config file.
    """
    if n_days < 45:
        raise ValueError("The synthetic bundle needs at least 45 days for every stage to have data.")
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    days = [SYNTHETIC_START + timedelta(days=i) for i in range(n_days)]
    ap_window = 20

    geo = _counties(rng, n_counties)
    records = _cases(rng, geo, days)
    write_geo_csv(geo, directory / SYNTHETIC_FILES["geo"])
    write_county_cases_csv(records, directory / SYNTHETIC_FILES["cases"])
    write_covid_totals_csv(_totals(records, rng, days), directory / SYNTHETIC_FILES["covid_totals"])
    write_trends_csv(_trends(rng, days), directory / SYNTHETIC_FILES["trends"])
    write_price_csv(_prices(rng, days[-1], ap_window + 10), directory / SYNTHETIC_FILES["prices"])

    config = {
        **SYNTHETIC_FILES,
        "output_dir": "output",
        "start_date": days[0].isoformat(),
        "end_date": days[-1].isoformat(),
        "split_date": days[int(n_days * 0.6)].isoformat(),
        "ap_window": ap_window,
        "n_trees": 50,
        "seed": seed,
    }
    config_path = directory / "config.toml"
    with open(config_path, "w", encoding="utf-8") as f:
        toml.dump(config, f)
    return config_path
