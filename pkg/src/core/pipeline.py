"""Flujo detección -> recorte -> segmentación -> severidad para una imagen."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence

from pydantic import BaseModel, ConfigDict

from src.core.config import DEFAULT_CROP_SIZE
from src.core.errors import InputError
from src.core.geometry import crop_resize
from src.core.severity import SeverityReport, severity_from_crop
from src.core.types import BinaryMask, Detection, GrayImage

logger = logging.getLogger(__name__)

Segmenter = Callable[[GrayImage], BinaryMask]


class LesionAssessment(BaseModel):
    model_config = ConfigDict(frozen=True)

    detection: Detection
    report: SeverityReport | None = None
    error: str | None = None


def assess_detections(
    image: GrayImage,
    detections: Sequence[Detection],
    segmenter: Segmenter,
    crop_size: int = DEFAULT_CROP_SIZE,
) -> list[LesionAssessment]:
    """
    Estima la severidad de cada detección de una imagen.

    Cada caja se recorta y se lleva a crop_size x crop_size, el `segmenter`
    devuelve la máscara del recorte y el MLD vuelve a coordenadas de la
    imagen. Una detección con máscara vacía o degenerada queda con
    `report=None` y el mensaje de error; el resto del lote sigue.
    """
    results = []
    for det in detections:
        try:
            crop, ctx = crop_resize(image, det.bbox, crop_size, crop_size)
            mask = segmenter(crop)
            if mask.shape != (crop_size, crop_size):
                raise InputError(f"el segmentador devolvió {mask.shape}, se esperaba {(crop_size, crop_size)}")
            results.append(LesionAssessment(detection=det, report=severity_from_crop(mask, ctx)))
        except InputError as e:
            logger.warning("Lesión %s sin severidad: %s", det.bbox.model_dump(), e)
            results.append(LesionAssessment(detection=det, error=str(e)))
    return results
