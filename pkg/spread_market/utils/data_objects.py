"""Serialization helpers shared by the logger, the manifest and the table writers."""

import hashlib
import json
from datetime import date, datetime
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Optional, Union

import numpy as np
import pandas as pd

#: float format used by every emitted table, so that reruns are byte-identical
FLOAT_FORMAT = "%.10g"


class SpreadMarketJSONEncoder(json.JSONEncoder):
    """
    A customized JSON encoder.

    It can handle some typical types of this package (numpy scalars and arrays, enums, dates, paths,
    frozen configs) that are not JSON serializable by default.
    """

    def default(self, z):
        """Converts a Python object to a JSON serializable object."""
        if isinstance(z, np.ndarray):
            return z.tolist()
        elif isinstance(z, np.integer):
            return int(z)
        elif isinstance(z, np.floating):
            return float(z)
        elif isinstance(z, np.bool_):
            return bool(z)
        elif isinstance(z, Enum):
            return z.name
        elif isinstance(z, (datetime, date)):
            return z.isoformat()
        elif isinstance(z, Path):
            return z.as_posix()
        elif isinstance(z, MappingProxyType):
            return dict(z)
        elif isinstance(z, (set, frozenset)):
            return sorted(z)
        else:
            return super().default(z)


def make_jsonable(obj):
    """Converts a Python object to a JSON serializable object. Handles numpy types, enums, dates and frozen
    mappings that are not JSON serializable by default.
    """
    return json.loads(SpreadMarketJSONEncoder().encode(obj))


def dump_json(obj, path: Union[str, Path]) -> Path:
    """Write ``obj`` as sorted, indented JSON."""
    path = Path(path)
    path.write_text(
        json.dumps(make_jsonable(obj), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def write_table(df: pd.DataFrame, path: Union[str, Path], float_format: Optional[str] = FLOAT_FORMAT) -> Path:
    """
    Write a table as a one-header CSV file.

    Floats use ``float_format`` (:data:`FLOAT_FORMAT` by default, ``None`` for shortest exact repr),
    missing values are written as empty cells and line endings are always ``\\n``.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=float_format, lineterminator="\n", na_rep="")
    return path


def file_checksum(path: Union[str, Path]) -> str:
    """Sha256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
