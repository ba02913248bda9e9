"""
Random-forest forecasting of the abnormal price with the P0..P4 predictor menu.

Trees are grown by recursive binary splitting: every node tries ``mtry`` randomly drawn features and
every midpoint between consecutive distinct values, keeps the split with the smallest residual sum of
squares and stops when the node has fewer than ``2 * min_leaf`` rows or no split lowers the RSS.
Each forecast horizon ``h`` gets its own model whose features are lagged by ``h`` (direct multi-step).
"""

import math
from dataclasses import dataclass, field
from datetime import date
from functools import partial
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .logger import RunLogger
from .timeseries import SeriesBundle, to_day_array
from .utils.parallel import parallel_map

SCORE_COLUMNS = ("model", "horizon", "rmse", "delta")
PREDICTION_COLUMNS = ("date", "observed", "predicted", "model")

BASELINE = "P0"
SPREAD_VARIABLES = ("V", "E", "GC", "T1", "T2", "M1", "M2", "M3", "M4", "M5", "M6", "TotM")
TRENDS_QUERIES = ("Covid-19 US", "Covid 19 US", "Covid-19 World")


class ForecastError(ValueError):
    """Base class of the errors raised by the forecaster."""


class UnknownSpec(ForecastError):
    """The model name is not in the menu, or a series it needs is absent."""


class EmptyFrame(ForecastError):
    """No row survives lagging and the removal of unavailable values."""


class EmptyTest(ForecastError):
    """No test row on or after the split date."""


@dataclass(frozen=True)
class ModelSpec:
    """A named predictor set: ``terms`` pairs a series name with the lags taken from it."""

    name: str
    terms: Tuple[Tuple[str, Tuple[int, ...]], ...]

    @property
    def feature_names(self) -> List[str]:
        """``"<series> lag <l>"`` for every term."""
        return [f"{series} lag {lag}" for series, lags in self.terms for lag in lags]

    @property
    def max_lag(self) -> int:
        """Largest lag of any term."""
        return max(lag for _, lags in self.terms for lag in lags)


_AP = ("AP", (1, 2, 3))

MODEL_MENU: Dict[str, ModelSpec] = {
    spec.name: spec
    for spec in (
        ModelSpec("P0", (_AP,)),
        ModelSpec("P1", (_AP, ("us_total_deaths", (1, 2, 3)), ("world_new_deaths", (1, 2, 3)))),
        ModelSpec("P2", (_AP, ("E", (1, 2, 3)), ("GC", (1, 2, 3)), ("T2", (1, 2, 3)), ("M4", (1, 2, 3)))),
        ModelSpec("P3", (_AP, ("Covid-19 US", (1, 2)), ("Covid 19 US", (1, 2)), ("Covid-19 World", (1, 2)))),
        ModelSpec(
            "P4",
            (_AP, ("Covid-19 US", (1, 2)), ("Covid 19 US", (1, 2)), ("T2", (1, 2)), ("us_total_deaths", (1, 2))),
        ),
    )
}


@dataclass(frozen=True, eq=False)
class SupervisedFrame:
    """
    Feature matrix and target of one (model, horizon) pair.

    Row ``i`` predicts ``target[i]`` on ``dates[i]`` from values dated at least ``horizon`` trading days
    earlier.
    """

    model: str
    horizon: int
    feature_names: Tuple[str, ...]
    features: np.ndarray
    target: np.ndarray
    dates: np.ndarray

    def __len__(self) -> int:
        """Number of usable rows."""
        return len(self.target)

    def subset(self, mask: np.ndarray) -> "SupervisedFrame":
        """Rows selected by a boolean mask."""
        return SupervisedFrame(
            self.model, self.horizon, self.feature_names, self.features[mask], self.target[mask], self.dates[mask]
        )


def build_frame(
    spec: Union[str, ModelSpec],
    bundle: SeriesBundle,
    horizon: int = 1,
    shift_by_horizon: bool = True,
    target: str = "AP",
) -> SupervisedFrame:
    """
    Lay out the features of ``spec`` against ``target`` for forecast horizon ``horizon``.

    Feature ``"<s> lag l"`` of the row dated ``t`` is the value of ``s`` at ``t - h - l + 1`` trading days
    (``t - l`` when ``shift_by_horizon`` is off). Rows with an unavailable value are dropped.

    Raises
    ------
    UnknownSpec
        Unknown model name, or a required series is missing from the bundle.
    EmptyFrame
        No row survives.
    """
    if isinstance(spec, str):
        if spec not in MODEL_MENU:
            raise UnknownSpec(f"Unknown model {spec!r}; expected one of {', '.join(MODEL_MENU)}.")
        spec = MODEL_MENU[spec]
    if horizon < 1:
        raise ForecastError("horizon must be a positive number of days.")
    for series, _ in spec.terms:
        if series not in bundle:
            raise UnknownSpec(f"Model {spec.name} needs series {series!r}, which is not in the bundle.")
    if target not in bundle:
        raise UnknownSpec(f"Target series {target!r} is not in the bundle.")

    n = len(bundle)
    shift = horizon - 1 if shift_by_horizon else 0
    columns = []
    for series, lags in spec.terms:
        values = bundle[series]
        for lag in lags:
            offset = shift + lag
            column = np.full(n, np.nan)
            if offset < n:
                column[offset:] = values[: n - offset]
            columns.append(column)
    features = np.column_stack(columns) if columns else np.empty((n, 0))
    y = np.asarray(bundle[target], dtype=float)
    keep = np.all(np.isfinite(features), axis=1) & np.isfinite(y)
    if not keep.any():
        raise EmptyFrame(f"Model {spec.name} at horizon {horizon} has no complete row.")
    return SupervisedFrame(
        model=spec.name,
        horizon=horizon,
        feature_names=tuple(spec.feature_names),
        features=features[keep],
        target=y[keep],
        dates=bundle.dates[keep],
    )


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """
    A fitted regression tree in array form.

    Node ``k`` is a leaf when ``feature[k] == -1``; otherwise rows with ``x[feature[k]] < threshold[k]``
    go to ``left[k]`` and the rest to ``right[k]``. ``value[k]`` is the mean training target of the node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_leaves(self) -> int:
        """Number of leaves."""
        return int(np.sum(self.feature == -1))

    def predict(self, rows: np.ndarray) -> np.ndarray:
        """Predictions for a 2-D array of feature rows."""
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        node = np.zeros(len(rows), dtype=np.int64)
        active = self.feature[node] != -1
        while active.any():
            current = node[active]
            go_left = rows[active, self.feature[current]] < self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = self.feature[node] != -1
        return self.value[node]


def best_split(
    features: np.ndarray, target: np.ndarray, candidates: Sequence[int], min_leaf: int
) -> Optional[Tuple[int, float, float]]:
    """
    The ``(feature, cutpoint, gain)`` with the largest RSS reduction, or None when no split is allowed.

    Cutpoints are midpoints between consecutive distinct values; both children must keep ``min_leaf``
    rows. Ties go to the earlier feature in ``candidates``, then to the smaller cutpoint.
    """
    n = len(target)
    centred = target - target.mean()
    node_rss = float(centred @ centred)
    best: Optional[Tuple[int, float, float]] = None
    sizes = np.arange(1, n)
    for feature in candidates:
        order = np.argsort(features[:, feature], kind="mergesort")
        xs = features[order, feature]
        ys = centred[order]
        s1 = np.cumsum(ys)[:-1]
        s2 = np.cumsum(ys * ys)[:-1]
        total1, total2 = float(ys.sum()), float(ys @ ys)
        left_rss = s2 - s1 * s1 / sizes
        right_rss = (total2 - s2) - (total1 - s1) ** 2 / (n - sizes)
        valid = (xs[1:] > xs[:-1]) & (sizes >= min_leaf) & (n - sizes >= min_leaf)
        if not valid.any():
            continue
        gains = np.where(valid, node_rss - (left_rss + right_rss), -np.inf)
        k = int(np.argmax(gains))
        if best is None or gains[k] > best[2]:
            cut = (xs[k] + xs[k + 1]) / 2.0
            if not xs[k] < cut:
                cut = xs[k + 1]
            best = (int(feature), float(cut), float(gains[k]))
    return best


def fit_tree(
    features: np.ndarray,
    target: np.ndarray,
    mtry: Optional[int] = None,
    min_leaf: int = 5,
    rng: Optional[np.random.Generator] = None,
) -> RegressionTree:
    """
    Grow one regression tree.

    ``mtry`` features (default all) are drawn without replacement at every node from ``rng``.
    """
    features = np.asarray(features, dtype=float)
    target = np.asarray(target, dtype=float)
    if len(target) == 0:
        raise EmptyFrame("Cannot fit a tree on an empty frame.")
    if min_leaf < 1:
        raise ForecastError("min_leaf must be at least 1.")
    n_features = features.shape[1]
    mtry = n_features if mtry is None else max(1, min(mtry, n_features))
    rng = rng if rng is not None else np.random.default_rng(0)

    feature: List[int] = []
    threshold: List[float] = []
    left: List[int] = []
    right: List[int] = []
    value: List[float] = []

    def grow(rows: np.ndarray) -> int:
        node = len(feature)
        y = target[rows]
        feature.append(-1)
        threshold.append(np.nan)
        left.append(-1)
        right.append(-1)
        value.append(float(y.mean()))
        if len(rows) < 2 * min_leaf or np.all(y == y[0]) or n_features == 0:
            return node
        candidates = np.sort(rng.choice(n_features, size=mtry, replace=False))
        split = best_split(features[rows], y, candidates, min_leaf)
        if split is None or split[2] <= 0.0:
            return node
        f, cut, _ = split
        goes_left = features[rows, f] < cut
        feature[node] = f
        threshold[node] = cut
        left[node] = grow(rows[goes_left])
        right[node] = grow(rows[~goes_left])
        return node

    grow(np.arange(len(target)))
    return RegressionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=float),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=float),
    )


@dataclass(frozen=True, eq=False)
class ForestModel:
    """Bagged regression trees; the prediction is the mean of the tree predictions."""

    trees: List[RegressionTree]
    n_trees: int
    mtry: int
    min_leaf: int
    seed: int
    feature_names: Tuple[str, ...] = field(default_factory=tuple)


def default_mtry(n_features: int) -> int:
    """``ceil(p / 3)``, at least 1."""
    return max(1, math.ceil(n_features / 3))


def _fit_one(
    seed_sequence: np.random.SeedSequence, features: np.ndarray, target: np.ndarray, mtry: int, min_leaf: int
) -> RegressionTree:
    rng = np.random.default_rng(seed_sequence)
    sample = rng.integers(0, len(target), size=len(target))
    return fit_tree(features[sample], target[sample], mtry=mtry, min_leaf=min_leaf, rng=rng)


def fit_forest(
    frame: Union[SupervisedFrame, Tuple[np.ndarray, np.ndarray]],
    n_trees: int = 500,
    mtry: Optional[int] = None,
    min_leaf: int = 5,
    seed: int = 0,
    jobs: int = 1,
) -> ForestModel:
    """
    Fit ``n_trees`` trees on bootstrap resamples of the frame.

    Tree ``i`` draws its resample and its feature subsets from the ``i``-th child of
    ``SeedSequence(seed)``, so a fixed seed gives the same forest for any ``jobs``.
    """
    if isinstance(frame, SupervisedFrame):
        features, target, names = frame.features, frame.target, frame.feature_names
    else:
        features, target = (np.asarray(a, dtype=float) for a in frame)
        features = features.reshape(len(target), -1)
        names = ()
    if n_trees < 1:
        raise ForecastError("n_trees must be at least 1.")
    if len(target) == 0:
        raise EmptyFrame("Cannot fit a forest on an empty frame.")
    mtry = default_mtry(features.shape[1]) if mtry is None else mtry
    children = np.random.SeedSequence(seed).spawn(n_trees)
    trees = parallel_map(
        partial(_fit_one, features=features, target=target, mtry=mtry, min_leaf=min_leaf), children, jobs=jobs
    )
    return ForestModel(trees=trees, n_trees=n_trees, mtry=mtry, min_leaf=min_leaf, seed=seed, feature_names=names)


def predict(model: ForestModel, rows: np.ndarray) -> Union[float, np.ndarray]:
    """Mean tree prediction; a 1-D ``rows`` is one feature row and gives a float."""
    rows = np.asarray(rows, dtype=float)
    single = rows.ndim == 1
    stacked = np.vstack([tree.predict(rows) for tree in model.trees])
    predictions = stacked.mean(axis=0)
    return float(predictions[0]) if single else predictions


def rmse(observed: np.ndarray, predicted: np.ndarray) -> float:
    """Root mean squared error."""
    residuals = np.asarray(observed, dtype=float) - np.asarray(predicted, dtype=float)
    return float(np.sqrt(np.mean(residuals**2)))


def delta_rmse(candidate: float, baseline: float) -> float:
    """Percentage improvement ``(1 - candidate / baseline) * 100``; positive when the candidate is better."""
    if baseline == 0.0:
        return 0.0 if candidate == 0.0 else float("-inf")
    return (1.0 - candidate / baseline) * 100.0


@dataclass(frozen=True)
class ForecastScore:
    """Test RMSE of one (model, horizon) pair and its improvement over the baseline."""

    model: str
    horizon: int
    rmse: float
    delta: float


@dataclass(frozen=True, eq=False)
class ForecastReport:
    """Scores of every (model, horizon) and the test predictions behind them."""

    scores: List[ForecastScore]
    predictions: Dict[int, pd.DataFrame]

    def score_table(self) -> pd.DataFrame:
        """``model,horizon,rmse,delta`` table."""
        return pd.DataFrame(
            [(s.model, s.horizon, s.rmse, s.delta) for s in self.scores], columns=list(SCORE_COLUMNS)
        )


def evaluate(
    bundle: SeriesBundle,
    models: Sequence[str] = tuple(MODEL_MENU),
    horizons: Sequence[int] = (1, 2, 3, 4, 5, 6),
    split_date: Union[str, date] = "2020-03-01",
    n_trees: int = 500,
    mtry: Optional[int] = None,
    min_leaf: int = 5,
    seed: int = 0,
    shift_by_horizon: bool = True,
    jobs: int = 1,
    logger: Optional[RunLogger] = None,
) -> ForecastReport:
    """
    Train every model on rows before ``split_date`` and score it on rows from ``split_date`` on.

    P0 is always fit as the baseline. At each horizon every model is scored on the same test dates (those
    usable by all scored models), and ``delta`` compares its RMSE with P0's. A candidate model whose rows do
    not reach both sides of the split, or that shares no test date with the models before it, is skipped at
    that horizon and logged.

    Raises
    ------
    EmptyTest
        The baseline has no test row at a horizon.
    EmptyFrame
        The baseline has no training row.
    """
    names = [BASELINE] + [m for m in dict.fromkeys(models) if m != BASELINE]
    for name in names:
        if name not in MODEL_MENU:
            raise UnknownSpec(f"Unknown model {name!r}; expected one of {', '.join(MODEL_MENU)}.")
    split = to_day_array([split_date])[0]

    scores: List[ForecastScore] = []
    predictions: Dict[int, pd.DataFrame] = {}
    for horizon in horizons:
        frames: Dict[str, Optional[SupervisedFrame]] = {
            BASELINE: build_frame(BASELINE, bundle, horizon, shift_by_horizon)
        }
        for name in names[1:]:
            try:
                frames[name] = build_frame(name, bundle, horizon, shift_by_horizon)
            except EmptyFrame:
                frames[name] = None
        baseline = frames[BASELINE]
        common = baseline.dates[baseline.dates >= split]
        if len(common) == 0:
            raise EmptyTest(f"No test row on or after {split} is usable by {BASELINE} at horizon {horizon}.")
        if not np.any(baseline.dates < split):
            raise EmptyFrame(f"Model {BASELINE} has no training row before {split} at horizon {horizon}.")
        scored = [BASELINE]
        for name in names[1:]:
            frame = frames[name]
            shared = np.intersect1d(common, frame.dates) if frame is not None else common[:0]
            train_rows = int(np.sum(frame.dates < split)) if frame is not None else 0
            if len(shared) == 0 or train_rows == 0:
                if logger is not None:
                    logger.log_numerical(
                        "forecast_model_skipped",
                        model=name,
                        horizon=horizon,
                        train_rows=train_rows,
                        test_rows=len(shared),
                    )
                continue
            common = shared
            scored.append(name)

        errors: Dict[str, float] = {}
        dumps = []
        for name in scored:
            frame = frames[name]
            train = frame.subset(frame.dates < split)
            test = frame.subset(np.isin(frame.dates, common))
            forest = fit_forest(train, n_trees=n_trees, mtry=mtry, min_leaf=min_leaf, seed=seed, jobs=jobs)
            predicted = predict(forest, test.features)
            errors[name] = rmse(test.target, predicted)
            dumps.append(
                pd.DataFrame(
                    {
                        "date": [str(d) for d in test.dates],
                        "observed": test.target,
                        "predicted": predicted,
                        "model": name,
                    }
                )
            )
            if logger is not None:
                logger.system_log(
                    "INFO",
                    {
                        "forecast": name,
                        "horizon": horizon,
                        "train_rows": len(train),
                        "test_rows": len(test),
                        "rmse": errors[name],
                    },
                )
        for name in scored:
            if name == BASELINE and BASELINE not in models:
                continue
            scores.append(ForecastScore(name, horizon, errors[name], delta_rmse(errors[name], errors[BASELINE])))
        predictions[horizon] = pd.concat(dumps, ignore_index=True)[list(PREDICTION_COLUMNS)]
    return ForecastReport(scores=scores, predictions=predictions)


def model_feature_counts(models: Mapping[str, ModelSpec] = MODEL_MENU) -> Dict[str, int]:
    """Number of features of every model."""
    return {name: len(spec.feature_names) for name, spec in models.items()}
