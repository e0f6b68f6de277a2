"""JSON estable para regresión: claves ordenadas y floats con 9 cifras significativas."""

from __future__ import annotations

import hashlib
import math
from pathlib import Path
from typing import Any

import numpy as np
import orjson
from pydantic import BaseModel

from src.core.errors import SchemaError

JSON_OPTIONS = orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2
SIGNIFICANT_DIGITS = 9


def _round_float(value: float) -> float | None:
    if not math.isfinite(value):
        return None
    return float(f"{value:.{SIGNIFICANT_DIGITS}g}")


def normalize(obj: Any) -> Any:
    """Convierte modelos, numpy y tuplas a tipos JSON; NaN/inf se vuelven null."""
    if isinstance(obj, BaseModel):
        return normalize(obj.model_dump())
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round_float(float(obj))
    return obj


def dumps(obj: Any) -> bytes:
    return orjson.dumps(normalize(obj), option=JSON_OPTIONS) + b"\n"


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(obj))
    return path


def read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        return orjson.loads(path.read_bytes())
    except FileNotFoundError as e:
        raise SchemaError(f"{path}: no existe") from e
    except orjson.JSONDecodeError as e:
        raise SchemaError(f"{path}: JSON inválido ({e})") from e


def digest(obj: Any) -> str:
    """SHA-256 de la forma canónica del objeto."""
    return hashlib.sha256(dumps(obj)).hexdigest()
