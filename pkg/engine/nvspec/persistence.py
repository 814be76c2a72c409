"""Writing result tables and JSON documents to an output directory."""

from __future__ import annotations

import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Literal

import numpy as np
import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)

OutputFormat = Literal["csv", "json"]


def _serialize_for_json(obj: Any) -> Any:
    """Recursively convert numpy, pydantic and path values into JSON-ready values."""
    if isinstance(obj, BaseModel):
        return _serialize_for_json(obj.model_dump(mode="json"))
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, Path):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return [_serialize_for_json(item) for item in obj.tolist()]
    if isinstance(obj, np.generic):
        return _serialize_for_json(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(key): _serialize_for_json(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_serialize_for_json(item) for item in obj]
    return obj


def dumps(document: Any) -> str:
    """Serialize ``document`` to deterministic, indented JSON."""
    return json.dumps(_serialize_for_json(document), indent=2, sort_keys=True) + "\n"


def write_json(document: Any, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(document), encoding="utf-8")
    logger.info(f"Wrote {path}")
    return path


def write_table(table: pd.DataFrame, directory: Path, stem: str, fmt: OutputFormat = "csv") -> Path:
    """Write ``table`` as ``<stem>.csv`` or ``<stem>.json`` inside ``directory``."""
    directory.mkdir(parents=True, exist_ok=True)
    if fmt == "csv":
        path = directory / f"{stem}.csv"
        table.to_csv(path, index=False, encoding="utf-8", lineterminator="\n")
    else:
        path = directory / f"{stem}.json"
        records = table.to_dict(orient="records")
        path.write_text(dumps(records), encoding="utf-8")
    logger.info(f"Wrote {path} ({len(table)} rows)")
    return path


def write_manifest(config: BaseModel | dict[str, Any], directory: Path, **extra: Any) -> Path:
    """Write ``manifest.json`` echoing the resolved configuration of a run."""
    document: dict[str, Any] = {"config": config}
    document.update(extra)
    return write_json(document, directory / "manifest.json")
