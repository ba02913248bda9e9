"""Run the registered stages in order, map their failures to exit codes and write the manifest."""

import time
from typing import Optional, Sequence, Type

from spread_market import __version__
from spread_market.causality import CausalityError
from spread_market.config import ConfigError, RunConfig
from spread_market.forecast import ForecastError
from spread_market.ingest import IngestError
from spread_market.logger import RunLogger
from spread_market.motifs import MotifError
from spread_market.network import NetworkError
from spread_market.timeseries import TimeSeriesError
from spread_market.volatility import VolatilityError

from . import stages as _stages  # noqa: F401  (registers the stages)
from .manifest import RUN_LOG, RunManifest, StageRecord
from .stage import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_NUMERICAL,
    StageContext,
    StageError,
    StageStatus,
    get_all_stages,
    get_stage,
)

#: exception families and the exit code they map to, checked in order
_EXIT_CODES = (
    (ConfigError, EXIT_CONFIG),
    ((IngestError, TimeSeriesError, NetworkError, MotifError, FileNotFoundError), EXIT_DATA),
    ((CausalityError, ForecastError, VolatilityError), EXIT_NUMERICAL),
)


def exit_code_for(error: BaseException) -> int:
    """Exit code of a stage failure; unknown errors count as numerical failures."""
    for family, code in _EXIT_CODES:
        if isinstance(error, family):
            return code
    return EXIT_NUMERICAL


def run_logger(config: RunConfig) -> RunLogger:
    """A logger appending to ``run_log.jsonl`` in the output folder."""
    return RunLogger(logged_by="spreadmkt", path=config.output_dir / RUN_LOG)


def run_pipeline(
    config: RunConfig,
    stages: Optional[Sequence[str]] = None,
    logger: Optional[RunLogger] = None,
) -> RunManifest:
    """
    Run ``stages`` (every registered stage by default) in registration order.

    A stage checks that the artifacts it depends on exist before it runs. The first failing stage stops the run;
    the manifest is written either way.

    Raises
    ------
    StageError
        A stage failed; ``exit_code`` is 2 (config), 3 (data) or 4 (numerical).
    """
    logger = logger or run_logger(config)
    registry = get_all_stages()
    selected = list(registry) if stages is None else [get_stage(name).name for name in stages]
    ordered = [registry[name] for name in registry if name in selected]

    manifest = RunManifest.start(config, __version__)
    context = StageContext(config=config, logger=logger)
    failure: Optional[StageError] = None
    for stage_class in ordered:
        failure = _run_stage(stage_class, context, manifest)
        if failure is not None:
            break

    manifest.collect_artifacts(config.output_dir)
    manifest.write(config.output_dir)
    if failure is not None:
        raise failure
    return manifest


def _run_stage(stage_class: Type, context: StageContext, manifest: RunManifest) -> Optional[StageError]:
    stage = stage_class(context)
    logger = context.logger
    logger.log_stage(stage.name, StageStatus.RUNNING.name)
    started = time.perf_counter()
    try:
        stage.check_upstream()
        rows = stage.run()
    except Exception as exc:  # noqa: BLE001
        seconds = time.perf_counter() - started
        error = exc if isinstance(exc, StageError) else StageError(stage.name, str(exc), exit_code_for(exc))
        manifest.exit_code = error.exit_code
        manifest.stages.append(StageRecord(stage.name, StageStatus.FAILED.name, seconds, error=str(error)))
        logger.log_stage(
            stage.name, StageStatus.FAILED.name, error=type(exc).__name__, message=str(exc), exit_code=error.exit_code
        )
        return error
    seconds = time.perf_counter() - started
    manifest.stages.append(StageRecord(stage.name, StageStatus.COMPLETED.name, seconds, rows=rows))
    logger.log_stage(stage.name, StageStatus.COMPLETED.name, rows=rows, seconds=seconds)
    return None
