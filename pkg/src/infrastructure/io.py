"""
Lectura y escritura de archivos: PNG de 8 bits, manifiesto y detecciones
JSON, pares de directorios y CSV.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import TypeVar

import cv2
import numpy as np
import pandas as pd
from pydantic import BaseModel, ValidationError

from src.core.errors import SchemaError
from src.core.types import BinaryMask, DatasetManifest, Detection, GrayImage, ImageRecord
from src.infrastructure.serialization import read_json

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)

CSV_FLOAT_FORMAT = "%.9g"


class DetectionsFile(BaseModel):
    detections: list[Detection]


# =========================
# PNG
# =========================
def read_png(path: str | Path) -> GrayImage:
    """
    Lee un PNG en escala de grises de 8 bits.

    Raises:
        SchemaError: archivo ilegible, con canales o con profundidad distinta de 8 bits.
    """
    path = Path(path)
    pixels = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if pixels is None:
        raise SchemaError(f"{path}: no se pudo leer como imagen")
    if pixels.ndim != 2:
        raise SchemaError(f"{path}: se esperaba un solo canal, tiene forma {pixels.shape}")
    if pixels.dtype != np.uint8:
        raise SchemaError(f"{path}: se esperaba 8 bits, tiene {pixels.dtype}")
    return GrayImage(pixels)


def read_mask(path: str | Path, threshold: int = 128) -> BinaryMask:
    return BinaryMask.from_gray(read_png(path), threshold)


def write_png(path: str | Path, image: GrayImage | BinaryMask) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    gray = image.to_gray() if isinstance(image, BinaryMask) else image
    if not cv2.imwrite(str(path), gray.pixels):
        raise SchemaError(f"{path}: no se pudo escribir el PNG")
    return path


# =========================
# JSON CON ESQUEMA
# =========================
def load_model(path: str | Path, model: type[M]) -> M:
    """Valida el JSON contra el modelo; los errores de pydantic se vuelven SchemaError."""
    data = read_json(path)
    try:
        return model.model_validate(data)
    except ValidationError as e:
        raise SchemaError(f"{path}: no cumple el esquema {model.__name__}:\n{e}") from e


def load_manifest(path: str | Path) -> DatasetManifest:
    return load_model(path, DatasetManifest)


def load_detections(path: str | Path) -> list[Detection]:
    return load_model(path, DetectionsFile).detections


class RecordImageLoader:
    """Carga la imagen de un registro; las rutas relativas parten del directorio del manifiesto."""

    def __init__(self, base_dir: str | Path):
        self.base_dir = Path(base_dir)

    def __call__(self, record: ImageRecord) -> GrayImage:
        path = Path(record.path)
        image = read_png(path if path.is_absolute() else self.base_dir / path)
        if (image.width, image.height) != (record.width, record.height):
            raise SchemaError(
                f"{record.id}: la imagen mide {image.width}x{image.height}, "
                f"el manifiesto dice {record.width}x{record.height}"
            )
        return image


# =========================
# DIRECTORIOS Y CSV
# =========================
def paired_pngs(gt_dir: str | Path, pred_dir: str | Path) -> list[tuple[str, Path, Path]]:
    """
    Empareja PNG por nombre de archivo, en orden alfabético.

    Raises:
        SchemaError: algún archivo no tiene pareja o no hay pares.
    """
    gt_dir, pred_dir = Path(gt_dir), Path(pred_dir)
    for d in (gt_dir, pred_dir):
        if not d.is_dir():
            raise SchemaError(f"{d}: no es un directorio")
    gt_names = {p.name for p in gt_dir.glob("*.png")}
    pred_names = {p.name for p in pred_dir.glob("*.png")}
    unpaired = sorted(gt_names ^ pred_names)
    if unpaired:
        raise SchemaError(f"archivos sin pareja: {', '.join(unpaired)}")
    if not gt_names:
        raise SchemaError(f"{gt_dir}: no hay archivos PNG")
    return [(name, gt_dir / name, pred_dir / name) for name in sorted(gt_names)]


def read_pairs_csv(path: str | Path, pred_col: str = "pred_mld", gt_col: str = "gt_mld") -> tuple[list[float], list[float]]:
    path = Path(path)
    try:
        df = pd.read_csv(path)
    except (FileNotFoundError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise SchemaError(f"{path}: CSV ilegible ({e})") from e

    missing = [c for c in (pred_col, gt_col) if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: faltan columnas {missing}")
    values = df[[pred_col, gt_col]].apply(pd.to_numeric, errors="coerce")
    if values.isna().any().any():
        bad = int(values.isna().any(axis=1).to_numpy().argmax()) + 2
        raise SchemaError(f"{path}: valor no numérico en la línea {bad}")
    if len(values) < 2:
        raise SchemaError(f"{path}: se requieren al menos 2 filas, hay {len(values)}")
    return values[pred_col].tolist(), values[gt_col].tolist()


def write_csv(path: str | Path, df: pd.DataFrame) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")
    return path
