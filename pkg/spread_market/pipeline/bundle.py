"""Read the run inputs and lay every analysis series out on the trading calendar."""

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from spread_market.config import RunConfig
from spread_market.forecast import SPREAD_VARIABLES
from spread_market.ingest import (
    COVID_VARIABLES,
    CountyCases,
    CountyGeo,
    read_county_cases,
    read_covid_totals_csv,
    read_geo_csv,
    read_price_csv,
    read_trends_csv,
    us_aggregates,
)
from spread_market.logger import RunLogger
from spread_market.timeseries import (
    CalendarKind,
    DailySeries,
    SeriesBundle,
    TimeSeriesError,
    abnormal_price,
    align_standardized,
    log_return_and_volatility,
    rolling_zscore,
)
from spread_market.volatility import covariate_log_returns

#: columns of ``series.csv`` that come from the index itself
MARKET_COLUMNS = ("price", "AP", "ret", "Vol")

#: table file suffix -> summary groups it joins
TABLE_GROUPS = {"covid": ("US Covid", "World Covid"), "spread": ("Spread",), "search": ("Search",)}


@dataclass
class RunInputs:
    """Everything read from the input files of one run."""

    cases: CountyCases
    geo: List[CountyGeo]
    prices: DailySeries
    trends: Dict[str, DailySeries]
    covid_totals: Dict[str, DailySeries]


def read_inputs(config: RunConfig, logger: Optional[RunLogger] = None) -> RunInputs:
    """
    Read and validate every configured input file.

    When no ``covid_totals`` file is set the four US aggregates are derived from the county records.
    """
    cases = read_county_cases(config.cases, logger=logger)
    geo = read_geo_csv(config.geo)
    prices = read_price_csv(config.prices)
    trends = read_trends_csv(config.trends)
    if config.covid_totals is not None:
        totals = read_covid_totals_csv(config.covid_totals)
    else:
        totals = us_aggregates(cases.records)
        if logger is not None:
            logger.system_log("INFO", {"covid_totals": "derived from county records", "variables": list(totals)})
    return RunInputs(cases=cases, geo=geo, prices=prices, trends=trends, covid_totals=totals)


def _on_dates(dates: np.ndarray, values: np.ndarray, trading: np.ndarray) -> np.ndarray:
    """Values at exactly the trading dates, ``nan`` where the series has no point."""
    return pd.Series(np.asarray(values, dtype=float), index=pd.DatetimeIndex(dates)).reindex(
        pd.DatetimeIndex(trading)
    ).to_numpy()


def _carried(series: DailySeries, trading: np.ndarray) -> np.ndarray:
    """Most recent value on or before each trading date, ``nan`` before the first point."""
    positions = np.searchsorted(series.dates, trading, side="right") - 1
    return np.where(positions >= 0, series.values[np.maximum(positions, 0)], np.nan)


def census_series_by_name(census: pd.DataFrame) -> Dict[str, DailySeries]:
    """The spread variables of a motif table as calendar series."""
    dates = list(census["date"].astype(str))
    return {
        name: DailySeries(dates, census[name].to_numpy(dtype=float), CalendarKind.CALENDAR, name)
        for name in SPREAD_VARIABLES
        if name in census.columns
    }


@dataclass(frozen=True, eq=False)
class AnalysisSeries:
    """
    The standardized series every statistic runs on, plus the raw covariate levels on the same dates.

    ``groups`` labels the covariates for the grouped correlation summary; ``table_groups`` joins them into the
    covid, spread and search tables.
    """

    bundle: SeriesBundle
    levels: Dict[str, np.ndarray]
    groups: Dict[str, Tuple[str, ...]] = field(default_factory=dict)

    @property
    def covariates(self) -> List[str]:
        """Standardized covariate names, in table order."""
        return [name for name in self.bundle.names if name not in MARKET_COLUMNS]

    @property
    def table_groups(self) -> Dict[str, Tuple[str, ...]]:
        """Table suffix -> covariates of that table; empty tables are left out."""
        tables = {
            suffix: tuple(name for group in members for name in self.groups.get(group, ()))
            for suffix, members in TABLE_GROUPS.items()
        }
        return {suffix: names for suffix, names in tables.items() if names}

    def covariate_columns(self) -> Dict[str, np.ndarray]:
        """Name -> standardized values on the trading dates."""
        return {name: self.bundle[name] for name in self.covariates}

    def egarch_design(
        self, covariates: Sequence[str], lags: Sequence[int]
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, Tuple[str, ...]]:
        """
        Returns and lagged covariate log returns on the rows where all of them are available.

        Returns
        -------
            (dates, returns, covariate matrix, covariate column names)
        """
        missing = [c for c in covariates if c not in self.levels]
        if missing:
            raise TimeSeriesError(f"EGARCH covariates {missing} are not among the run series {list(self.levels)}.")
        returns = np.asarray(self.bundle["ret"], dtype=float)
        n = len(returns)
        names, columns = [], []
        for covariate in covariates:
            changes = covariate_log_returns(self.levels[covariate])
            for lag in lags:
                column = np.full(n, np.nan)
                if lag < n:
                    column[lag:] = changes[: n - lag]
                names.append(f"{covariate} lag {lag}")
                columns.append(column)
        x = np.column_stack(columns) if columns else np.empty((n, 0))
        keep = np.isfinite(returns) & np.all(np.isfinite(x), axis=1)
        return self.bundle.dates[keep], returns[keep], x[keep], tuple(names)


def build_analysis_series(
    config: RunConfig,
    inputs: RunInputs,
    census: pd.DataFrame,
    logger: Optional[RunLogger] = None,
) -> AnalysisSeries:
    """
    Abnormal price, log returns, volatility and every standardized covariate on the trading days of the run.

    The abnormal price uses the price history before ``start_date`` as its warm-up. Covariates are standardized
    with a trailing ``z_window`` z-score on their own calendar first and then carried onto trading days.

    Raises
    ------
    TimeSeriesError
        No trading day in the run window, or too little price history for ``ap_window``.
    """
    prices = inputs.prices.between(end=config.end_date)
    trading = prices.between(start=config.start_date).dates
    if len(trading) == 0:
        raise TimeSeriesError(f"No trading day between {config.start_date} and {config.end_date}.")

    ap = abnormal_price(prices, config.ap_window)
    returns, volatility = log_return_and_volatility(prices)
    columns = {
        "price": _on_dates(prices.dates, prices.values, trading),
        "AP": _on_dates(ap.dates, ap.values, trading),
        "ret": _on_dates(returns.dates, returns.values, trading),
        "Vol": _on_dates(volatility.dates, volatility.values, trading),
    }

    spread = census_series_by_name(census)
    covid = {name: inputs.covid_totals[name] for name in COVID_VARIABLES if name in inputs.covid_totals}
    calendar: Dict[str, DailySeries] = {**covid, **spread, **inputs.trends}
    levels = {}
    for name, series in calendar.items():
        series = series.between(end=config.end_date).renamed(name)
        standardized = rolling_zscore(series, config.z_window, logger=logger)
        columns[name], _ = align_standardized(standardized, trading)
        levels[name] = _carried(series, trading)

    groups = {
        "US Covid": tuple(n for n in covid if n.startswith("us_")),
        "World Covid": tuple(n for n in covid if n.startswith("world_")),
        "Spread": tuple(spread),
        "Search": tuple(inputs.trends),
    }
    bundle = SeriesBundle(trading, columns)
    if logger is not None:
        logger.system_log(
            "INFO",
            {
                "trading_days": len(bundle),
                "covariates": len(calendar),
                "first": str(trading[0]),
                "last": str(trading[-1]),
            },
        )
    return AnalysisSeries(bundle=bundle, levels=levels, groups={k: v for k, v in groups.items() if v})

