"""The run manifest: what was run, on which inputs, and what it wrote."""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from spread_market.config import RunConfig
from spread_market.utils.data_objects import dump_json, file_checksum

MANIFEST = "manifest.json"
RUN_LOG = "run_log.jsonl"

#: files of the output folder that are not artifacts (they carry wall-clock times)
NOT_ARTIFACTS = (MANIFEST, RUN_LOG)


@dataclass
class StageRecord:
    """Outcome of one stage."""

    name: str
    status: str
    seconds: float
    rows: Dict[str, int] = field(default_factory=dict)
    error: Optional[str] = None


@dataclass
class RunManifest:
    """
    Written once per run as ``manifest.json``.

    ``artifacts`` maps every output file (relative to the output folder) to its sha256; identical inputs and
    config reproduce identical artifact checksums.
    """

    version: str
    config: Dict[str, Any]
    inputs: Dict[str, Dict[str, str]]
    stages: List[StageRecord] = field(default_factory=list)
    artifacts: Dict[str, str] = field(default_factory=dict)
    exit_code: int = 0

    @classmethod
    def start(cls, config: RunConfig, version: str) -> "RunManifest":
        """A manifest with the config snapshot and the checksums of the input files that exist."""
        inputs = {
            key: {"path": path.as_posix(), "sha256": file_checksum(path)}
            for key, path in config.input_paths.items()
            if path.exists()
        }
        return cls(version=version, config=dict(config.snapshot()), inputs=inputs)

    def collect_artifacts(self, output_dir: Path):
        """Checksum every artifact currently in ``output_dir``."""
        output_dir = Path(output_dir)
        self.artifacts = {
            path.relative_to(output_dir).as_posix(): file_checksum(path)
            for path in sorted(output_dir.rglob("*"))
            if path.is_file() and path.name not in NOT_ARTIFACTS
        }

    @property
    def rows(self) -> Dict[str, int]:
        """Row counts of every table written during the run."""
        return {name: count for stage in self.stages for name, count in stage.rows.items()}

    def write(self, output_dir: Path) -> Path:
        """Write ``manifest.json``."""
        return dump_json(asdict(self), Path(output_dir) / MANIFEST)
