"""Stage orchestration: inputs, the ordered stages, the runner and the manifest."""

from .manifest import RunManifest
from .runner import exit_code_for, run_pipeline
from .stage import BaseStage, MissingUpstream, StageError, add_stage, get_all_stages
