"""
The stages of a run, registered in execution order.

Each stage reads the run inputs and the artifacts of the stages before it from the output folder, and writes its
own tables next to them. Within one run the parsed inputs and the analysis series are shared through the
context cache.
"""

from typing import Dict, List

import numpy as np
import pandas as pd

from spread_market.causality import (
    causality_layout,
    causality_sweep,
    causality_table,
    correlation_group_table,
    correlation_summary,
    correlation_sweep,
    correlation_table,
)
from spread_market.forecast import evaluate
from spread_market.ingest import IngestError, daily_case_maps
from spread_market.motifs import MotifError, census_series, census_table
from spread_market.network import (
    NetworkError,
    SpreadGraph,
    build_daily_graphs,
    dump_graph,
    feature_table,
    load_graph,
    network_features,
)
from spread_market.utils.data_objects import write_table
from spread_market.volatility import EgarchSpec, compare_models, fit_egarch, variance_table

from .bundle import TABLE_GROUPS, AnalysisSeries, RunInputs, build_analysis_series, read_inputs
from .stage import EXIT_DATA, BaseStage, MissingUpstream, StageError, add_stage

NETWORK_FEATURES = "network_features.csv"
GRAPH_DIR = "graphs"
MOTIFS = "motifs.csv"
SERIES = "series.csv"
CORRELATIONS = "correlations.csv"
CORRELATION_SUMMARY = "correlation_summary.csv"
CAUSALITY = "causality.csv"
CAUSALITY_LAYOUT = "causality_layout.csv"
FORECAST = "forecast.csv"
EGARCH = "egarch.csv"
EGARCH_MODEL0 = "egarch_model0.csv"
EGARCH_MODELX = "egarch_modelX.csv"

#: targets of the correlation and Granger sweeps
TARGETS = ("AP", "Vol")


def predictions_name(horizon: int) -> str:
    """Prediction dump of one horizon."""
    return f"predictions_h{horizon}.csv"


def correlations_name(group: str, target: str = "AP") -> str:
    """Correlation table of one covariate group; the abnormal-price table carries no target suffix."""
    return f"correlations_{group}.csv" if target == "AP" else f"correlations_{group}_{target.lower()}.csv"


def causality_name(group: str, layout: bool = False) -> str:
    """Causality table (or its lag layout) of one covariate group."""
    return f"causality_layout_{group}.csv" if layout else f"causality_{group}.csv"


class _InputStage(BaseStage):
    """A stage that needs the parsed inputs."""

    def inputs(self) -> RunInputs:
        """Inputs of the run, read once. Unreadable inputs fail as the ``ingest`` stage."""
        if "inputs" not in self.context.cache:
            try:
                self.context.cache["inputs"] = read_inputs(self.config, logger=self.logger)
            except (IngestError, FileNotFoundError) as exc:
                raise StageError(IngestStage.name, str(exc), EXIT_DATA) from exc
        return self.context.cache["inputs"]

    def graphs(self) -> List[SpreadGraph]:
        """Daily spread networks over the run window."""
        if "graphs" not in self.context.cache:
            config = self.config
            maps = daily_case_maps(self.inputs().cases.records, basis=config.case_basis)
            days = {d: counts for d, counts in maps.items() if config.start_date <= d <= config.end_date}
            if not days:
                raise NetworkError(f"No county record between {config.start_date} and {config.end_date}.")
            self.context.cache["graphs"] = build_daily_graphs(
                days,
                self.inputs().geo,
                gamma=config.gamma,
                lambda_=config.lambda_,
                delta=config.delta,
                jobs=config.jobs,
                logger=self.logger,
            )
        return self.context.cache["graphs"]


class _SeriesStage(_InputStage):
    """A stage that runs on the standardized series; needs the motif table."""

    requires = (MOTIFS,)

    def series(self) -> AnalysisSeries:
        """Analysis series of the run, built once."""
        if "series" not in self.context.cache:
            census = pd.read_csv(self.path(MOTIFS), dtype={"date": str})
            self.context.cache["series"] = build_analysis_series(self.config, self.inputs(), census, logger=self.logger)
        return self.context.cache["series"]


@add_stage
class IngestStage(_InputStage):
    """Read and validate every input file; writes nothing."""

    name = "ingest"

    def run(self) -> Dict[str, int]:
        self.context.cache.pop("inputs", None)
        inputs = self.inputs()
        return {
            "cases": len(inputs.cases.records),
            "geo": len(inputs.geo),
            "prices": len(inputs.prices),
            "trends": sum(len(s) for s in inputs.trends.values()),
            "covid_totals": sum(len(s) for s in inputs.covid_totals.values()),
        }


@add_stage
class NetworkStage(_InputStage):
    """Daily spread networks: ``date,V,E,GC`` features and, optionally, node / edge dumps."""

    name = "network"
    produces = (NETWORK_FEATURES, GRAPH_DIR)

    def run(self) -> Dict[str, int]:
        self.context.cache.pop("graphs", None)
        graphs = self.graphs()
        write_table(feature_table([network_features(g) for g in graphs]), self.path(NETWORK_FEATURES))
        if self.config.dump_graphs:
            directory = self.path(GRAPH_DIR)
            directory.mkdir(exist_ok=True)
            for stale in list(directory.glob("*.nodes")) + list(directory.glob("*.edges")):
                stale.unlink()
            for graph in graphs:
                dump_graph(graph, directory)
        return {NETWORK_FEATURES: len(graphs)}


@add_stage
class MotifsStage(_InputStage):
    """Triad and tetrad census of every daily network."""

    name = "motifs"
    requires = (NETWORK_FEATURES,)
    produces = (MOTIFS,)

    def cached_graphs(self) -> List[SpreadGraph]:
        """The graphs of this run, else the dumps of the ``network`` stage (rebuilt when dumps are off)."""
        if "graphs" in self.context.cache:
            return self.context.cache["graphs"]
        if not self.config.dump_graphs:
            return self.graphs()
        days = pd.read_csv(self.path(NETWORK_FEATURES), dtype={"date": str})["date"]
        directory = self.path(GRAPH_DIR)
        graphs = []
        for day in pd.to_datetime(days).dt.date:
            try:
                graphs.append(load_graph(directory, day))
            except FileNotFoundError as exc:
                raise MissingUpstream(self.name, directory / f"{day.isoformat()}.nodes") from exc
        return graphs

    def run(self) -> Dict[str, int]:
        graphs = self.cached_graphs()
        if not graphs:
            raise MotifError("The network stage produced no graph.")
        rows = census_series(graphs, method=self.config.census_method, jobs=self.config.jobs)
        write_table(census_table(rows), self.path(MOTIFS))
        self.context.cache.pop("series", None)
        return {MOTIFS: len(rows)}


@add_stage
class TransformStage(_SeriesStage):
    """Abnormal price, returns, volatility and the standardized covariates on trading days (plot data)."""

    name = "transform"
    produces = (SERIES,)

    def run(self) -> Dict[str, int]:
        frame = self.series().bundle.to_frame()
        write_table(frame, self.path(SERIES))
        return {SERIES: len(frame)}


@add_stage
class CorrelateStage(_SeriesStage):
    """Lagged Spearman correlations of every covariate with the abnormal price and with volatility."""

    name = "correlate"
    produces = (CORRELATIONS, CORRELATION_SUMMARY) + tuple(
        correlations_name(group, target) for group in TABLE_GROUPS for target in TARGETS
    )

    def run(self) -> Dict[str, int]:
        series = self.series()
        rows = correlation_sweep(
            {target: series.bundle[target] for target in TARGETS},
            series.covariate_columns(),
            max_lag=self.config.max_lag,
            logger=self.logger,
        )
        self.remove_stale(self.produces)
        table = correlation_table(rows)
        summary = correlation_summary(rows, series.groups)
        write_table(table, self.path(CORRELATIONS))
        write_table(summary, self.path(CORRELATION_SUMMARY))
        counts = {CORRELATIONS: len(table), CORRELATION_SUMMARY: len(summary)}
        for group, variables in series.table_groups.items():
            for target in TARGETS:
                name = correlations_name(group, target)
                group_table = correlation_group_table(rows, variables, target)
                write_table(group_table, self.path(name))
                counts[name] = len(group_table)
        significant = int((table["p"] < self.config.correlation_alpha).sum())
        self.logger.system_log("INFO", {"stage": self.name, "significant_correlations": significant})
        return counts


@add_stage
class GrangerStage(_SeriesStage):
    """Granger causality of every covariate on the abnormal price and on volatility, lag orders ``1..max_lag``."""

    name = "granger"
    produces = (CAUSALITY, CAUSALITY_LAYOUT) + tuple(
        causality_name(group, layout) for group in TABLE_GROUPS for layout in (False, True)
    )

    def run(self) -> Dict[str, int]:
        series = self.series()
        cells = causality_sweep(
            {target: series.bundle[target] for target in TARGETS},
            series.covariate_columns(),
            max_lag=self.config.max_lag,
            alpha=self.config.causality_alpha,
            jobs=self.config.jobs,
            logger=self.logger,
        )
        self.remove_stale(self.produces)
        table = causality_table(cells)
        layout = causality_layout(cells, self.config.max_lag)
        write_table(table, self.path(CAUSALITY))
        write_table(layout, self.path(CAUSALITY_LAYOUT))
        counts = {CAUSALITY: len(table), CAUSALITY_LAYOUT: len(layout)}
        for group, variables in series.table_groups.items():
            members = [c for c in cells if c.variable in variables]
            group_table = causality_table(members)
            group_layout = causality_layout(members, self.config.max_lag)
            write_table(group_table, self.path(causality_name(group)))
            write_table(group_layout, self.path(causality_name(group, layout=True)))
            counts[causality_name(group)] = len(group_table)
            counts[causality_name(group, layout=True)] = len(group_layout)
        return counts


@add_stage
class ForecastStage(_SeriesStage):
    """Random-forest forecasts of the abnormal price; RMSE of every model against P0 per horizon."""

    name = "forecast"
    produces = (FORECAST,)

    def run(self) -> Dict[str, int]:
        config = self.config
        report = evaluate(
            self.series().bundle,
            models=config.models,
            horizons=config.horizons,
            split_date=config.split_date,
            n_trees=config.n_trees,
            mtry=config.mtry,
            min_leaf=config.min_leaf,
            seed=config.seed,
            shift_by_horizon=config.shift_by_horizon,
            jobs=config.jobs,
            logger=self.logger,
        )
        for stale in self.context.output_dir.glob("predictions_h*.csv"):
            stale.unlink()
        counts = {}
        for horizon, predictions in report.predictions.items():
            write_table(predictions, self.path(predictions_name(horizon)))
            counts[predictions_name(horizon)] = len(predictions)
        scores = report.score_table()
        write_table(scores, self.path(FORECAST))
        counts[FORECAST] = len(scores)
        return counts


@add_stage
class EgarchStage(_SeriesStage):
    """EGARCH(1, 1) of the index returns without (Model 0) and with (Model X) the lagged covariates."""

    name = "egarch"
    produces = (EGARCH, EGARCH_MODEL0, EGARCH_MODELX)

    def run(self) -> Dict[str, int]:
        config = self.config
        dates, returns, x, names = self.series().egarch_design(config.egarch_covariates, config.egarch_lags)
        fit0 = fit_egarch(EgarchSpec(), returns, max_iter=config.egarch_max_iter, logger=self.logger)
        fitX = fit_egarch(
            EgarchSpec(names),
            returns,
            x,
            max_iter=config.egarch_max_iter,
            logger=self.logger,
            initial=np.concatenate([fit0.params, np.zeros(len(names))]),
        )
        comparison = compare_models(fit0, fitX)
        write_table(comparison.table, self.path(EGARCH))
        write_table(variance_table(fit0, dates, returns), self.path(EGARCH_MODEL0))
        write_table(variance_table(fitX, dates, returns), self.path(EGARCH_MODELX))
        self.logger.system_log("INFO", {"stage": self.name, "summary": comparison.summary()})
        return {EGARCH: len(comparison.table), EGARCH_MODEL0: len(returns), EGARCH_MODELX: len(returns)}
