"""Define the base class of stage, which every pipeline step inherits from, and the stage registry."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum, auto
from pathlib import Path
from typing import Any, ClassVar, Dict, Iterable, Tuple, Type

from spread_market.config import RunConfig
from spread_market.logger import RunLogger

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class StageStatus(Enum):
    """
    The status of one stage.

    - ``WAITING``: the stage has not started yet
    - ``RUNNING``: the stage is currently running
    - ``COMPLETED``: the stage wrote all its artifacts
    - ``FAILED``: the stage raised an error; later stages are not run
    """

    WAITING = auto()
    RUNNING = auto()
    COMPLETED = auto()
    FAILED = auto()


class MissingUpstream(FileNotFoundError):
    """An artifact written by an earlier stage is not in the output folder."""

    def __init__(self, stage: str, path: Path):
        self.stage = stage
        self.path = Path(path)
        super().__init__(f"{stage} needs {self.path.name}; run the upstream stage first ({self.path} is missing).")


class StageError(RuntimeError):
    """A stage failed; carries the stage name and the process exit code."""

    def __init__(self, stage: str, message: str, exit_code: int):
        self.stage = stage
        self.message = message
        self.exit_code = exit_code
        super().__init__(f"stage {stage} failed: {message}")


@dataclass
class StageContext:
    """What a stage runs with: the config, the run logger and an in-memory cache shared by the stages of one run."""

    config: RunConfig
    logger: RunLogger
    cache: Dict[str, Any] = field(default_factory=dict)

    @property
    def output_dir(self) -> Path:
        """Folder of every artifact."""
        return self.config.output_dir


class BaseStage(ABC):
    """
    The abstract class of stage.

    All the stages should inherit from this class and set ``name``, ``requires`` (artifacts of earlier stages,
    relative to the output folder) and ``produces`` (artifacts written by this stage).
    """

    name: ClassVar[str] = ""
    requires: ClassVar[Tuple[str, ...]] = ()
    produces: ClassVar[Tuple[str, ...]] = ()

    def __init__(self, context: StageContext):
        self.context = context

    @property
    def config(self) -> RunConfig:
        """Run configuration."""
        return self.context.config

    @property
    def logger(self) -> RunLogger:
        """Run logger."""
        return self.context.logger

    def path(self, name: str) -> Path:
        """Absolute path of an artifact."""
        return self.context.output_dir / name

    def check_upstream(self):
        """Raise :class:`MissingUpstream` for the first required artifact that does not exist."""
        for name in self.requires:
            if not self.path(name).exists():
                raise MissingUpstream(self.name, self.path(name))

    def remove_stale(self, names: Iterable[str]):
        """Delete the named artifacts of an earlier run."""
        for name in names:
            if self.path(name).is_file():
                self.path(name).unlink()

    @abstractmethod
    def run(self) -> Dict[str, int]:
        """
        Run the stage and write its artifacts.

        Returns
        -------
            row counts of the written tables, keyed by artifact name
        """
        raise NotImplementedError


_stage_registry: Dict[str, Type[BaseStage]] = {}


def add_stage(stage: Type[BaseStage]) -> Type[BaseStage]:
    """Register a stage under its ``name``."""
    if not stage.name:
        raise ValueError(f"Stage {stage.__name__} has no name.")
    if stage.name in _stage_registry:
        raise KeyError(f"Duplicated stage name {stage.name}")
    _stage_registry[stage.name] = stage
    return stage


def get_all_stages() -> Dict[str, Type[BaseStage]]:
    """Get all the stages in the registry, in registration (execution) order."""
    return _stage_registry.copy()


def get_stage(name: str) -> Type[BaseStage]:
    """Get one stage by name."""
    if name not in _stage_registry:
        raise KeyError(f"Unknown stage {name!r}; expected one of {', '.join(_stage_registry)}.")
    return _stage_registry[name]
