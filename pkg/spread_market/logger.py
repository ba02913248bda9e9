"""Logger module takes charge of recording information, warnings and errors during a pipeline run."""

import json
from datetime import datetime, timedelta
from enum import Enum, auto, unique
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union

from .utils.data_objects import make_jsonable


@unique
class LoggingType(Enum):
    """Different types of log."""

    STAGE = auto()
    DATA_REPAIR = auto()
    NUMERICAL = auto()
    SYSTEM_LOG = auto()
    OTHER = auto()


class LoggingLevel(Enum):
    """Different level log."""

    CRITICAL = 50
    FATAL = CRITICAL
    ERROR = 40
    WARNING = 30
    WARN = WARNING
    INFO = 20
    DEBUG = 10


def _level_value(level: Union[str, int, LoggingLevel]) -> int:
    if isinstance(level, str):
        return LoggingLevel[level].value
    if isinstance(level, LoggingLevel):
        return level.value
    return int(level)


class RunLogger:
    """
    A structured logger with predefined log patterns.

    Every record is a dict ``{"logged_by", "type", "level", "log_data", "created_at"}``. Records are kept in
    memory and, when ``path`` is given, appended to a JSON-lines file.
    """

    def __init__(self, logged_by: str = "spread_market", path: Optional[Union[str, Path]] = None):
        self.logged_by = logged_by
        self.path = Path(path) if path is not None else None
        self._records: List[Dict[str, Any]] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def log(
        self,
        level: Union[str, int, LoggingLevel],
        log_data: Dict[str, Any],
        logging_type: LoggingType = LoggingType.OTHER,
    ) -> Dict[str, Any]:
        """
        Basic log function.

        Args:
            level: the level of this log, which can be string, int or :py:class:`LoggingLevel <LoggingLevel>`
            log_data: the data to be logged
            logging_type: the type of logging.
        """
        record = {
            "logged_by": self.logged_by,
            "type": logging_type.name,
            "level": _level_value(level),
            "log_data": make_jsonable(log_data),
            "created_at": datetime.now(),
        }
        self._records.append(record)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(make_jsonable(record), sort_keys=True) + "\n")
        return record

    def system_log(self, level: Union[str, int, LoggingLevel], log_data: Dict[str, Any]):
        """Log that comes from the pipeline machinery itself."""
        return self.log(level=level, log_data=log_data, logging_type=LoggingType.SYSTEM_LOG)

    def log_stage(self, stage: str, status: str, **data):
        """Log a stage transition (started / completed / failed) with row counts or timings."""
        level = LoggingLevel.ERROR if status == "FAILED" else LoggingLevel.INFO
        return self.log(
            level=level,
            log_data={"stage": stage, "status": status, **data},
            logging_type=LoggingType.STAGE,
        )

    def log_repair(self, what: str, **data):
        """Log an input repair (monotone fix, dropped row, skipped county)."""
        return self.log(
            level=LoggingLevel.WARNING,
            log_data={"repair": what, **data},
            logging_type=LoggingType.DATA_REPAIR,
        )

    def log_numerical(self, what: str, level: Union[str, int, LoggingLevel] = LoggingLevel.WARNING, **data):
        """Log a numerical event (skipped cell, non-converged optimizer, singular Hessian)."""
        return self.log(
            level=level,
            log_data={"event": what, **data},
            logging_type=LoggingType.NUMERICAL,
        )

    @property
    def records(self) -> List[Dict[str, Any]]:
        """All records logged by this instance."""
        return list(self._records)

    def filter_log(
        self,
        level: Union[str, int, LoggingLevel],
        within: Optional[timedelta] = None,
        logging_type: Optional[LoggingType] = None,
    ) -> Iterable[Dict[str, Any]]:
        """Find log within a range of time (1h/1d or else) higher than certain level."""
        threshold = _level_value(level)
        since = datetime.now() - within if within is not None else None
        return [
            record
            for record in self._records
            if record["level"] >= threshold
            and (since is None or record["created_at"] >= since)
            and (logging_type is None or record["type"] == logging_type.name)
        ]


def read_log_file(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Read back the JSON-lines records written by a :class:`RunLogger`."""
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
