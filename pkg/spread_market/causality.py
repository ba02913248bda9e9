"""
Lagged Spearman correlations and univariate Granger causality F-tests.

Inputs are aligned arrays in which ``nan`` marks an unavailable point; every test drops incomplete rows
listwise before computing anything.
"""

from dataclasses import dataclass
from functools import partial
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy import linalg, stats

from .logger import RunLogger
from .timeseries import DailySeries
from .utils.parallel import parallel_map

CORRELATION_COLUMNS = ("variable", "lag", "rho", "p")
CORRELATION_LONG_COLUMNS = ("variable", "lag", "target", "rho", "p")
CAUSALITY_COLUMNS = ("variable", "lag", "target", "F", "p", "flag")
SUMMARY_COLUMNS = ("group", "target", "lag", "n", "min", "q1", "median", "q3", "max")

SIGNIFICANT = "significant"
NOT_SIGNIFICANT = "not significant"

#: short label of each target in the causality layout
TARGET_LABELS = {"AP": "P", "Vol": "Vol"}


class CausalityError(ValueError):
    """Base class of the errors raised by the statistical tests."""


class DegenerateInput(CausalityError):
    """A constant input makes the statistic undefined."""


class InsufficientData(CausalityError):
    """Too few complete rows for the requested test."""


class SingularDesign(CausalityError):
    """The regression design matrix is rank-deficient."""


@dataclass(frozen=True)
class LagCorrelation:
    """Spearman correlation of ``x`` shifted back by ``lag`` days against ``y``."""

    x_name: str
    y_name: str
    lag: int
    rho: float
    p_value: float
    n: int


@dataclass(frozen=True)
class GrangerResult:
    """F-test of lags ``1..lag`` of ``x`` added to an autoregression of ``y`` of the same order."""

    x_name: str
    y_name: str
    lag: int
    rss_restricted: float
    rss_unrestricted: float
    f_stat: float
    p_value: float
    n_effective: int

    def significant(self, alpha: float = 0.10) -> bool:
        """Whether the null of no Granger causality is rejected at level ``alpha``."""
        return self.p_value < alpha


@dataclass(frozen=True)
class CausalityCell:
    """One (variable, lag, target) cell of the causality grid; ``f_stat`` / ``p_value`` are None on error."""

    variable: str
    lag: int
    target: str
    f_stat: Optional[float]
    p_value: Optional[float]
    flag: str


ArrayLike = Union[Sequence[float], np.ndarray, DailySeries]


def _values(x: ArrayLike) -> np.ndarray:
    if isinstance(x, DailySeries):
        return np.asarray(x.values, dtype=float)
    return np.asarray(x, dtype=float)


def spearman(x: ArrayLike, y: ArrayLike) -> Tuple[float, float]:
    """
    Spearman rank correlation with average ranks for ties, and its two-sided p-value.

    The p-value uses ``t = rho * sqrt((n - 2) / (1 - rho**2))`` with ``n - 2`` degrees of freedom.

    Raises
    ------
    InsufficientData
        Fewer than three pairs.
    DegenerateInput
        Either input is constant or not finite.
    """
    x, y = _values(x), _values(y)
    if x.shape != y.shape or x.ndim != 1:
        raise CausalityError("spearman needs two one-dimensional inputs of equal length.")
    n = len(x)
    if n < 3:
        raise InsufficientData(f"spearman needs at least 3 pairs, got {n}.")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateInput("spearman inputs must be finite; drop unavailable points first.")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise DegenerateInput("spearman is undefined for a constant input.")

    rx = stats.rankdata(x, method="average")
    ry = stats.rankdata(y, method="average")
    rx = rx - rx.mean()
    ry = ry - ry.mean()
    rho = float(np.clip(np.dot(rx, ry) / np.sqrt(np.dot(rx, rx) * np.dot(ry, ry)), -1.0, 1.0))
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho**2))
    return rho, float(2.0 * stats.t.sf(abs(t), n - 2))


def _shift_pairs(x: np.ndarray, y: np.ndarray, lag: int) -> Tuple[np.ndarray, np.ndarray]:
    """Pairs ``(x[t - lag], y[t])`` with unavailable rows removed."""
    if lag < 0:
        raise CausalityError("lag must be non-negative.")
    if len(x) != len(y):
        raise CausalityError("x and y must be aligned to the same dates.")
    if lag >= len(x):
        raise InsufficientData(f"lag {lag} leaves no pair in a series of {len(x)} points.")
    xs, ys = (x[: len(x) - lag], y[lag:]) if lag else (x, y)
    keep = np.isfinite(xs) & np.isfinite(ys)
    return xs[keep], ys[keep]


def lagged_correlation(x: ArrayLike, y: ArrayLike, lag: int, x_name: str = "x", y_name: str = "y") -> LagCorrelation:
    """Spearman correlation of ``x`` shifted back by ``lag`` against ``y``."""
    xs, ys = _shift_pairs(_values(x), _values(y), lag)
    rho, p_value = spearman(xs, ys)
    return LagCorrelation(x_name=x_name, y_name=y_name, lag=lag, rho=rho, p_value=p_value, n=len(xs))


def lagged_correlations(
    x: ArrayLike, y: ArrayLike, max_lag: int = 7, x_name: Optional[str] = None, y_name: Optional[str] = None
) -> List[LagCorrelation]:
    """
    Correlations for lags ``0..max_lag`` (``max_lag + 1`` rows).

    ``x`` and ``y`` must live on the same (trading) dates. Errors of any lag propagate.
    """
    if isinstance(x, DailySeries) and isinstance(y, DailySeries) and not np.array_equal(x.dates, y.dates):
        raise CausalityError("x and y must be aligned to the same dates.")
    x_name = x_name or (x.name if isinstance(x, DailySeries) else "x")
    y_name = y_name or (y.name if isinstance(y, DailySeries) else "y")
    return [lagged_correlation(x, y, lag, x_name, y_name) for lag in range(max_lag + 1)]


def _lag_matrix(values: np.ndarray, d: int) -> np.ndarray:
    """Column ``k - 1`` holds ``values[t - k]``; rows without history are ``nan``."""
    n = len(values)
    lags = np.full((n, d), np.nan)
    for k in range(1, d + 1):
        lags[k:, k - 1] = values[: n - k]
    return lags


def _rank(design: np.ndarray) -> int:
    norms = np.linalg.norm(design, axis=0)
    scaled = design / np.where(norms > 0, norms, 1.0)
    r = linalg.qr(scaled, mode="r", pivoting=True)[0]
    diagonal = np.abs(np.diag(r))
    if len(diagonal) == 0 or diagonal[0] == 0:
        return 0
    return int(np.sum(diagonal > max(design.shape) * np.finfo(float).eps * diagonal[0]))


def _rss(design: np.ndarray, target: np.ndarray) -> float:
    coefficients = linalg.lstsq(design, target)[0]
    residuals = target - design @ coefficients
    return float(residuals @ residuals)


def granger_test(y: ArrayLike, x: ArrayLike, d: int, x_name: str = "x", y_name: str = "y") -> GrangerResult:
    """
    Test whether lags ``1..d`` of ``x`` reduce the residual variance of an order-``d`` autoregression of ``y``.

    Both models carry an intercept and are fit by least squares on the same complete rows.
    ``F = ((RSS_r - RSS_u) / d) / (RSS_u / (n - 2d - 1))`` with the p-value from ``F(d, n - 2d - 1)``.
    When the lags of ``x`` add nothing to the column space of the restricted design (``x`` constant),
    ``F = 0`` and ``p = 1``.

    Raises
    ------
    InsufficientData
        ``n - 2d - 1 <= 0`` complete rows.
    SingularDesign
        The restricted design, or the unrestricted one beyond the ``x`` block, is rank-deficient.
    """
    if d < 1:
        raise CausalityError("Lag order d must be at least 1.")
    y, x = _values(y), _values(x)
    if len(y) != len(x):
        raise CausalityError("x and y must be aligned to the same dates.")
    rows = np.column_stack([y, _lag_matrix(y, d), _lag_matrix(x, d)])
    rows = rows[np.all(np.isfinite(rows), axis=1)]
    n = len(rows)
    df2 = n - 2 * d - 1
    if df2 <= 0:
        raise InsufficientData(f"Granger test of order {d} needs more than {2 * d + 1} complete rows, got {n}.")

    target = rows[:, 0]
    intercept = np.ones((n, 1))
    restricted = np.hstack([intercept, rows[:, 1 : d + 1]])
    unrestricted = np.hstack([intercept, rows[:, 1:]])
    rank_restricted = _rank(restricted)
    if rank_restricted < restricted.shape[1]:
        raise SingularDesign(f"Autoregression of {y_name!r} of order {d} is rank-deficient.")
    rss_restricted = _rss(restricted, target)
    rank_unrestricted = _rank(unrestricted)
    if rank_unrestricted == rank_restricted:
        return GrangerResult(x_name, y_name, d, rss_restricted, rss_restricted, 0.0, 1.0, n)
    if rank_unrestricted < unrestricted.shape[1]:
        raise SingularDesign(f"Lags of {x_name!r} are collinear with the autoregression of {y_name!r}.")

    rss_unrestricted = min(_rss(unrestricted, target), rss_restricted)
    if rss_unrestricted <= 0.0:
        return GrangerResult(x_name, y_name, d, rss_restricted, 0.0, float("inf"), 0.0, n)
    f_stat = max(((rss_restricted - rss_unrestricted) / d) / (rss_unrestricted / df2), 0.0)
    p_value = float(stats.f.sf(f_stat, d, df2))
    return GrangerResult(x_name, y_name, d, rss_restricted, rss_unrestricted, float(f_stat), p_value, n)


def _error_flag(error: CausalityError) -> str:
    if isinstance(error, InsufficientData):
        return "insufficient data"
    if isinstance(error, SingularDesign):
        return "singular design"
    if isinstance(error, DegenerateInput):
        return "degenerate input"
    return "error"


def _granger_cell(item: Tuple[str, int, str, np.ndarray, np.ndarray], alpha: float) -> CausalityCell:
    variable, lag, target, y, x = item
    try:
        result = granger_test(y, x, lag, x_name=variable, y_name=target)
    except CausalityError as error:
        return CausalityCell(variable, lag, target, None, None, _error_flag(error))
    flag = SIGNIFICANT if result.significant(alpha) else NOT_SIGNIFICANT
    return CausalityCell(variable, lag, target, result.f_stat, result.p_value, flag)


def causality_sweep(
    targets: Mapping[str, ArrayLike],
    covariates: Mapping[str, ArrayLike],
    max_lag: int = 7,
    alpha: float = 0.10,
    jobs: int = 1,
    logger: Optional[RunLogger] = None,
) -> List[CausalityCell]:
    """
    Granger test of every covariate against every target for lag orders ``1..max_lag``.

    Cells are ordered by covariate, then lag, then target. A cell that cannot be computed keeps its place
    with a reason in ``flag`` (``"insufficient data"``, ``"singular design"``) instead of aborting the sweep.
    """
    items = [
        (variable, lag, target, _values(y), _values(x))
        for variable, x in covariates.items()
        for lag in range(1, max_lag + 1)
        for target, y in targets.items()
    ]
    cells = parallel_map(partial(_granger_cell, alpha=alpha), items, jobs=jobs)
    if logger is not None:
        skipped = [
            {"variable": c.variable, "lag": c.lag, "target": c.target, "reason": c.flag}
            for c in cells
            if c.p_value is None
        ]
        if skipped:
            logger.log_numerical("granger_cells_skipped", count=len(skipped), cells=skipped)
    return cells


def causality_table(cells: Iterable[CausalityCell]) -> pd.DataFrame:
    """Long ``variable,lag,target,F,p,flag`` table; skipped cells have blank ``F`` and ``p``."""
    return pd.DataFrame(
        [
            (c.variable, c.lag, c.target, np.nan if c.f_stat is None else c.f_stat,
             np.nan if c.p_value is None else c.p_value, c.flag)
            for c in cells
        ],
        columns=list(CAUSALITY_COLUMNS),
    )


def causality_layout(cells: Iterable[CausalityCell], max_lag: Optional[int] = None) -> pd.DataFrame:
    """
    Pivot the grid into one row per variable and one column per lag.

    A cell reads ``P/Vol`` when the variable Granger-causes both the abnormal price and the volatility at
    that lag, ``P`` or ``Vol`` when it causes only one, and ``-`` otherwise.
    """
    cells = list(cells)
    max_lag = max_lag or max((c.lag for c in cells), default=0)
    variables: Dict[str, Dict[int, List[str]]] = {}
    for c in cells:
        lags = variables.setdefault(c.variable, {})
        if c.flag == SIGNIFICANT:
            lags.setdefault(c.lag, []).append(c.target)
    rows = []
    for variable, lags in variables.items():
        row = [variable]
        for lag in range(1, max_lag + 1):
            hits = [TARGET_LABELS.get(t, t) for t in TARGET_LABELS if t in lags.get(lag, [])]
            hits += [t for t in lags.get(lag, []) if t not in TARGET_LABELS]
            row.append("/".join(hits) if hits else "-")
        rows.append(row)
    return pd.DataFrame(rows, columns=["variable"] + [str(lag) for lag in range(1, max_lag + 1)])


def correlation_sweep(
    target: Union[ArrayLike, Mapping[str, ArrayLike]],
    covariates: Mapping[str, ArrayLike],
    max_lag: int = 7,
    target_name: str = "AP",
    logger: Optional[RunLogger] = None,
) -> List[LagCorrelation]:
    """
    Lagged correlations of every covariate against ``target`` for lags ``0..max_lag``.

    ``target`` is one series (named ``target_name``) or a mapping of target name to series; rows are ordered by
    covariate, then lag, then target. A cell that cannot be computed is kept with ``nan`` rho and p-value and
    logged.
    """
    targets = dict(target) if isinstance(target, Mapping) else {target_name: target}
    rows = []
    skipped = []
    for variable, x in covariates.items():
        for lag in range(max_lag + 1):
            for name, y in targets.items():
                try:
                    rows.append(lagged_correlation(x, y, lag, x_name=variable, y_name=name))
                except CausalityError as error:
                    skipped.append({"variable": variable, "lag": lag, "target": name, "reason": _error_flag(error)})
                    rows.append(LagCorrelation(variable, name, lag, float("nan"), float("nan"), 0))
    if skipped and logger is not None:
        logger.log_numerical("correlation_cells_skipped", count=len(skipped), cells=skipped)
    return rows


def correlation_table(rows: Iterable[LagCorrelation]) -> pd.DataFrame:
    """Long ``variable,lag,target,rho,p`` table."""
    return pd.DataFrame(
        [(r.x_name, r.lag, r.y_name, r.rho, r.p_value) for r in rows], columns=list(CORRELATION_LONG_COLUMNS)
    )


def correlation_group_table(
    rows: Iterable[LagCorrelation], variables: Sequence[str], target: str = "AP"
) -> pd.DataFrame:
    """``variable,lag,rho,p`` table of one target restricted to ``variables``, in row order."""
    members = set(variables)
    return pd.DataFrame(
        [(r.x_name, r.lag, r.rho, r.p_value) for r in rows if r.y_name == target and r.x_name in members],
        columns=list(CORRELATION_COLUMNS),
    )


def correlation_summary(rows: Iterable[LagCorrelation], groups: Mapping[str, Sequence[str]]) -> pd.DataFrame:
    """
    Five-number summary of rho per (group, target, lag): the data behind grouped box plots.

    ``groups`` maps a group label to the variables it contains; unavailable rho values are ignored.
    """
    frame = correlation_table(rows)
    targets = list(dict.fromkeys(frame["target"]))
    records = []
    for group, members in groups.items():
        subset = frame[frame["variable"].isin(list(members))].dropna(subset=["rho"])
        for target in targets:
            for lag in sorted(frame["lag"].unique()):
                rho = subset.loc[(subset["lag"] == lag) & (subset["target"] == target), "rho"].to_numpy()
                if len(rho) == 0:
                    records.append((group, target, int(lag), 0) + (np.nan,) * 5)
                    continue
                q1, median, q3 = np.percentile(rho, [25, 50, 75])
                records.append((group, target, int(lag), len(rho), rho.min(), q1, median, q3, rho.max()))
    return pd.DataFrame(records, columns=list(SUMMARY_COLUMNS))
