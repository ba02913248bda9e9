"""
Date-indexed daily series and the standardization / return transforms applied to them.

Every transform is a pure function over immutable inputs. Standardized outputs carry an explicit
``available`` mask: the first ``window`` points (and any zero-variance point of a rolling z-score) are
marked unavailable and hold ``nan`` in ``values``; they are never silently zero.
"""

from dataclasses import dataclass
from datetime import date
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .logger import RunLogger


class CalendarKind(Enum):
    """Whether a series lives on every calendar day or on exchange trading days only."""

    CALENDAR = "calendar"
    TRADING = "trading"


class StandardizationKind(Enum):
    """The two standardizations: long trailing window on prices, short rolling window on covariates."""

    ABNORMAL_PRICE = "abnormal_price"
    ROLLING_Z = "rolling_z"


class TimeSeriesError(ValueError):
    """Base class of the errors raised by this module."""


class InvalidSeries(TimeSeriesError):
    """The dates or values violate the series invariants."""


class WindowTooLong(TimeSeriesError):
    """The series is shorter than the window plus one observation."""


class ZeroVariance(TimeSeriesError):
    """A trailing window is constant, so the standardization is undefined."""


class NonPositivePrice(TimeSeriesError):
    """A log return was requested on a zero or negative price."""


class NoPriorValue(TimeSeriesError):
    """A trading date precedes every covariate observation."""


DateLike = Union[str, date, np.datetime64, pd.Timestamp]


def to_day_array(dates: Iterable[DateLike]) -> np.ndarray:
    """Convert ISO strings (numpy strings included), dates or timestamps into a ``datetime64[D]`` array."""
    values = [str(d) if isinstance(d, str) else d for d in dates]
    if not values:
        return np.empty(0, dtype="datetime64[D]")
    return pd.to_datetime(values).values.astype("datetime64[D]")


@dataclass(frozen=True, eq=False)
class DailySeries:
    """
    A real-valued series with one value per strictly increasing day.

    - ``dates``: ``datetime64[D]`` array, strictly increasing
    - ``values``: finite float array, same length as ``dates``
    - ``calendar_kind``: calendar days or trading days
    - ``name``: optional label carried into tables
    """

    dates: np.ndarray
    values: np.ndarray
    calendar_kind: CalendarKind = CalendarKind.CALENDAR
    name: str = ""

    def __post_init__(self):
        """Normalize the arrays and check the invariants."""
        raw_dates = np.asarray(self.dates)
        dates = (
            np.array(raw_dates, dtype="datetime64[D]") if raw_dates.dtype == "datetime64[D]" else to_day_array(raw_dates)
        )
        values = np.array(self.values, dtype=float)
        if dates.ndim != 1 or values.ndim != 1:
            raise InvalidSeries("dates and values must be one-dimensional.")
        if len(dates) != len(values):
            raise InvalidSeries(
                f"Series {self.name!r} has {len(dates)} dates but {len(values)} values."
            )
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            raise InvalidSeries(f"Dates of series {self.name!r} must be strictly increasing without duplicates.")
        if not np.all(np.isfinite(values)):
            raise InvalidSeries(f"Series {self.name!r} contains non-finite values.")
        dates.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        """Number of observations."""
        return len(self.dates)

    @classmethod
    def from_pairs(
        cls,
        pairs: Iterable[Tuple[DateLike, float]],
        calendar_kind: CalendarKind = CalendarKind.CALENDAR,
        name: str = "",
    ) -> "DailySeries":
        """Build a series from ``(date, value)`` pairs, sorting them by date."""
        pairs = sorted(((np.datetime64(pd.Timestamp(d).date(), "D"), float(v)) for d, v in pairs), key=lambda p: p[0])
        return cls(
            dates=np.asarray([p[0] for p in pairs], dtype="datetime64[D]"),
            values=np.asarray([p[1] for p in pairs], dtype=float),
            calendar_kind=calendar_kind,
            name=name,
        )

    def to_pandas(self) -> pd.Series:
        """The series as a ``pandas.Series`` indexed by timestamps."""
        return pd.Series(self.values, index=pd.DatetimeIndex(self.dates), name=self.name or None)

    def between(self, start: Optional[DateLike] = None, end: Optional[DateLike] = None) -> "DailySeries":
        """Restrict to ``start <= date <= end`` (either bound optional)."""
        mask = np.ones(len(self.dates), dtype=bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(pd.Timestamp(start).date(), "D")
        if end is not None:
            mask &= self.dates <= np.datetime64(pd.Timestamp(end).date(), "D")
        return DailySeries(self.dates[mask], self.values[mask], self.calendar_kind, self.name)

    def renamed(self, name: str) -> "DailySeries":
        """Same data under another name."""
        return DailySeries(self.dates, self.values, self.calendar_kind, name)


@dataclass(frozen=True, eq=False)
class StandardizedSeries:
    """
    A standardized series on the dates of its ``base`` series.

    ``values[i]`` is only meaningful where ``available[i]`` is true; unavailable points hold ``nan``.
    """

    base: DailySeries
    window: int
    kind: StandardizationKind
    values: np.ndarray
    available: np.ndarray

    def __post_init__(self):
        """Check the availability invariants."""
        if self.window < 1:
            raise InvalidSeries("window must be a positive integer.")
        values = np.array(self.values, dtype=float)
        available = np.array(self.available, dtype=bool)
        if len(values) != len(self.base) or len(available) != len(self.base):
            raise InvalidSeries("Standardized values must align with the base series.")
        if available[: self.window].any():
            raise InvalidSeries(f"The first {self.window} points must be unavailable.")
        if not np.all(np.isfinite(values[available])):
            raise InvalidSeries("Available standardized values must be finite.")
        values = np.where(available, values, np.nan)
        values.setflags(write=False)
        available.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "available", available)

    @property
    def dates(self) -> np.ndarray:
        """Dates of the base series."""
        return self.base.dates

    @property
    def name(self) -> str:
        """Name of the base series."""
        return self.base.name

    def __len__(self) -> int:
        """Number of points, available or not."""
        return len(self.base)

    def dropna(self) -> DailySeries:
        """Only the available points, as a plain series."""
        return DailySeries(
            self.base.dates[self.available], self.values[self.available], self.base.calendar_kind, self.base.name
        )

    def as_daily(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(dates, values)`` including unavailable ``nan`` points."""
        return self.base.dates, self.values


def _trailing_stats(values: np.ndarray, window: int) -> Tuple[np.ndarray, np.ndarray]:
    """Mean and sample standard deviation of ``values[t-window:t]`` for every ``t >= window``."""
    windows = np.lib.stride_tricks.sliding_window_view(values[:-1], window)
    return windows.mean(axis=1), windows.std(axis=1, ddof=1)


def _degenerate(std: np.ndarray, mean: np.ndarray) -> np.ndarray:
    # relative tolerance: a window of equal floats can carry rounding noise in its stdev
    return std <= 1e-12 * np.maximum(np.abs(mean), 1.0)


def abnormal_price(prices: DailySeries, window: int = 148) -> StandardizedSeries:
    """
    Standardize each price against the mean and sample standard deviation of the ``window`` preceding prices.

    Raises
    ------
    WindowTooLong
        If the series has fewer than ``window + 1`` observations.
    ZeroVariance
        If any trailing window is constant.
    """
    if window < 2:
        raise TimeSeriesError("window must be at least 2 for a sample standard deviation.")
    n = len(prices)
    if n < window + 1:
        raise WindowTooLong(f"abnormal_price needs at least {window + 1} observations, got {n}.")
    mean, std = _trailing_stats(prices.values, window)
    if np.any(_degenerate(std, mean)):
        first = int(np.argmax(_degenerate(std, mean))) + window
        raise ZeroVariance(f"Trailing {window}-day window before {prices.dates[first]} is constant.")
    values = np.full(n, np.nan)
    values[window:] = (prices.values[window:] - mean) / std
    available = np.zeros(n, dtype=bool)
    available[window:] = True
    return StandardizedSeries(prices, window, StandardizationKind.ABNORMAL_PRICE, values, available)


def log_return_and_volatility(prices: DailySeries) -> Tuple[DailySeries, DailySeries]:
    """
    Daily log returns ``r_t = ln(P_t / P_{t-1})`` and the squared-return volatility proxy ``Vol_t = r_t**2``.

    Both outputs start at the second date of ``prices``.
    """
    if len(prices) < 2:
        raise TimeSeriesError("At least two prices are needed for a return.")
    if np.any(prices.values <= 0):
        bad = prices.dates[int(np.argmax(prices.values <= 0))]
        raise NonPositivePrice(f"Price on {bad} is not strictly positive.")
    returns = np.diff(np.log(prices.values))
    dates = prices.dates[1:]
    return (
        DailySeries(dates, returns, prices.calendar_kind, "ret"),
        DailySeries(dates, returns**2, prices.calendar_kind, "Vol"),
    )


def rolling_zscore(
    series: DailySeries, window: int = 7, logger: Optional[RunLogger] = None
) -> StandardizedSeries:
    """
    Standardize each point against the mean and sample standard deviation of the ``window`` preceding points.

    Points whose trailing window has zero variance are marked unavailable (and logged when a logger is
    given) rather than raising.
    """
    if window < 2:
        raise TimeSeriesError("rolling_zscore needs window >= 2 (sample standard deviation).")
    n = len(series)
    values = np.full(n, np.nan)
    available = np.zeros(n, dtype=bool)
    if n > window:
        mean, std = _trailing_stats(series.values, window)
        ok = ~_degenerate(std, mean)
        z = np.full(len(mean), np.nan)
        z[ok] = (series.values[window:][ok] - mean[ok]) / std[ok]
        values[window:] = z
        available[window:] = ok
        if logger is not None and not ok.all():
            logger.log_repair(
                "zero_variance_window",
                series=series.name,
                dates=[str(d) for d in series.dates[window:][~ok]],
            )
    return StandardizedSeries(series, window, StandardizationKind.ROLLING_Z, values, available)


def align_to_trading_days(covariate: DailySeries, trading: Union[DailySeries, Sequence[DateLike]]) -> DailySeries:
    """
    Sample a calendar-day covariate on trading dates.

    Each trading date takes the covariate value on that date, or the most recent earlier value when the
    covariate has no observation there.

    Raises
    ------
    NoPriorValue
        If a trading date precedes all covariate dates.
    """
    trading_dates = trading.dates if isinstance(trading, DailySeries) else to_day_array(trading)
    if len(covariate) == 0:
        raise NoPriorValue(f"Covariate {covariate.name!r} is empty.")
    positions = np.searchsorted(covariate.dates, trading_dates, side="right") - 1
    if np.any(positions < 0):
        first = trading_dates[int(np.argmax(positions < 0))]
        raise NoPriorValue(f"Trading date {first} precedes every observation of {covariate.name!r}.")
    return DailySeries(trading_dates, covariate.values[positions], CalendarKind.TRADING, covariate.name)


def align_standardized(series: StandardizedSeries, trading_dates: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Carry a standardized calendar series onto trading dates.

    Returns ``(values, available)`` on ``trading_dates``; a trading date is unavailable when the carried
    calendar point is unavailable or no earlier point exists.
    """
    positions = np.searchsorted(series.dates, trading_dates, side="right") - 1
    found = positions >= 0
    safe = np.where(found, positions, 0)
    available = found & series.available[safe]
    values = np.where(available, series.values[safe], np.nan)
    return values, available


@dataclass(frozen=True, eq=False)
class SeriesBundle:
    """
    Every analysis series sampled on one trading calendar.

    ``columns`` maps a series name to a float array aligned with ``dates``; ``nan`` marks an unavailable
    point (standardization warm-up, zero-variance window, missing history).
    """

    dates: np.ndarray
    columns: Dict[str, np.ndarray]

    def __post_init__(self):
        """Copy and freeze the arrays, checking their lengths."""
        dates = np.array(self.dates, dtype="datetime64[D]")
        if len(dates) > 1 and not np.all(dates[1:] > dates[:-1]):
            raise InvalidSeries("Bundle dates must be strictly increasing.")
        columns = {}
        for name, values in self.columns.items():
            values = np.array(values, dtype=float)
            if values.shape != dates.shape:
                raise InvalidSeries(f"Column {name!r} has {len(values)} values for {len(dates)} dates.")
            values.setflags(write=False)
            columns[name] = values
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "columns", columns)

    def __len__(self) -> int:
        """Number of trading dates."""
        return len(self.dates)

    def __contains__(self, name: str) -> bool:
        """Whether a series of that name is present."""
        return name in self.columns

    def __getitem__(self, name: str) -> np.ndarray:
        """Values of one series."""
        return self.columns[name]

    @property
    def names(self) -> List[str]:
        """Series names in insertion order."""
        return list(self.columns)

    def to_frame(self) -> pd.DataFrame:
        """A ``date`` column followed by every series."""
        return pd.DataFrame({"date": [str(d) for d in self.dates], **self.columns})
