"""
Artifact writers for CLI runs.

Includes:
- Flattening result models into pandas frames
- CSV emission with a leading ``#`` header line (tool version, seed, sample
  counts) and a fixed 12-significant-digit float format
- JSON emission for reports, manifest echoes and errors

CSV bytes depend only on the values written, so identical manifests and
seeds give identical files.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Union

import pandas as pd
from pydantic import BaseModel

from qmask import __version__
from qmask.core.config import get_settings
from qmask.exceptions import QMaskException

logger = logging.getLogger(__name__)

Row = Union[BaseModel, Mapping[str, Any]]


def _flatten_value(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return ";".join(str(_flatten_value(v)) for v in value)
    return value


def to_frame(rows: Iterable[Row], columns: Optional[List[str]] = None) -> pd.DataFrame:
    """
    Rows (models or dicts) as a frame; nested dicts become ``parent.child``
    columns and lists are joined with ``;``.
    """
    records = [
        row.model_dump(mode="json") if isinstance(row, BaseModel) else dict(row)
        for row in rows
    ]
    frame = pd.json_normalize(records) if records else pd.DataFrame(columns=columns)
    frame = frame.apply(lambda col: col.map(_flatten_value))
    if columns is not None:
        frame = frame.reindex(columns=columns)
    return frame


def header_line(**fields: Any) -> str:
    """``# qmask <version> key=value ...`` with keys in sorted order."""
    parts = [
        f"{key}={fields[key]}" for key in sorted(fields) if fields[key] is not None
    ]
    return " ".join(["#", get_settings().APP_NAME, __version__, *parts])


def write_csv(
    frame: pd.DataFrame, path: Path, header: Optional[Dict[str, Any]] = None
) -> Path:
    """Write ``frame`` with a header comment line and '%.12g' floats."""
    precision = get_settings().CSV_PRECISION
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header_line(**(header or {})) + "\n")
        frame.to_csv(
            fh,
            index=False,
            float_format=f"%.{precision}g",
            lineterminator="\n",
        )
    logger.info("Wrote %d rows to %s", len(frame), path)
    return path


def read_csv(path: Path) -> pd.DataFrame:
    """Read an artifact back, skipping the header comment."""
    return pd.read_csv(path, comment="#")


def write_json(payload: Union[BaseModel, Mapping[str, Any]], path: Path) -> Path:
    if isinstance(payload, BaseModel):
        payload = payload.model_dump(mode="json")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    return path


def error_payload(exc: BaseException) -> Dict[str, Any]:
    """Machine-readable form of any failure; toolkit errors keep their details."""
    if isinstance(exc, QMaskException):
        return exc.to_dict()
    return {
        "error": type(exc).__name__,
        "message": str(exc),
        "exit_code": None,
        "details": {},
    }
