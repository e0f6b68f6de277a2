"""Tipos compartidos: ráster, geometría, anotaciones y manifiesto del dataset."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_serializer, model_validator

_BOX_FIELDS = ("x_min", "y_min", "x_max", "y_max")


def _owned(array: np.ndarray) -> np.ndarray:
    # Copia propia y contigua: nadie más puede mutar los píxeles
    return np.ascontiguousarray(array).copy()


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Imagen en escala de grises de 8 bits, forma (alto, ancho)."""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValueError(f"GrayImage requiere un arreglo 2-D no vacío, recibido {pixels.shape}")
        if pixels.dtype != np.uint8:
            if pixels.size and (pixels.min() < 0 or pixels.max() > 255):
                raise ValueError("GrayImage requiere intensidades en [0, 255]")
            pixels = pixels.astype(np.uint8)
        object.__setattr__(self, "pixels", _owned(pixels))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return np.array_equal(self.pixels, other.pixels)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Máscara booleana de la lesión; True = primer plano."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"BinaryMask requiere un arreglo 2-D no vacío, recibido {data.shape}")
        object.__setattr__(self, "data", _owned(data.astype(bool)))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def is_empty(self) -> bool:
        return not self.data.any()

    def count(self) -> int:
        return int(self.data.sum())

    @classmethod
    def from_gray(cls, image: GrayImage, threshold: int = 128) -> BinaryMask:
        return cls(image.pixels >= threshold)

    def to_gray(self) -> GrayImage:
        return GrayImage(np.where(self.data, 255, 0).astype(np.uint8))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    __hash__ = None


class Point(BaseModel):
    """Coordenada de píxel (x, y); origen arriba a la izquierda. En JSON: [x, y]."""

    model_config = ConfigDict(frozen=True)

    x: float
    y: float

    @model_validator(mode="before")
    @classmethod
    def _from_sequence(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            if len(value) != 2:
                raise ValueError("un punto requiere exactamente [x, y]")
            return {"x": value[0], "y": value[1]}
        return value

    @model_validator(mode="after")
    def _finite(self) -> Point:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("las coordenadas del punto deben ser finitas")
        return self

    @model_serializer
    def _as_list(self) -> list[float]:
        return [self.x, self.y]


class BoundingBox(BaseModel):
    """Caja en pares de esquinas. En JSON: [x1, y1, x2, y2]."""

    model_config = ConfigDict(frozen=True)

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @model_validator(mode="before")
    @classmethod
    def _from_sequence(cls, value: Any) -> Any:
        if isinstance(value, (list, tuple)):
            if len(value) != 4:
                raise ValueError("una caja requiere exactamente [x1, y1, x2, y2]")
            return dict(zip(_BOX_FIELDS, value))
        return value

    @model_validator(mode="after")
    def _well_formed(self) -> BoundingBox:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError("coordenadas de caja no finitas")
        if min(coords) < 0:
            raise ValueError(f"coordenadas de caja negativas: {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"caja degenerada: {coords}")
        return self

    @model_serializer
    def _as_list(self) -> list[float]:
        return [self.x_min, self.y_min, self.x_max, self.y_max]

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def as_array(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.x_max, self.y_max], dtype=float)


class LesionAnnotation(BaseModel):
    """Lesión de referencia: caja y, opcionalmente, ubicación y valor del MLD."""

    model_config = ConfigDict(frozen=True)

    bbox: BoundingBox
    mld_point: Point | None = None
    mld_px: float | None = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _mld_inside_box(self) -> LesionAnnotation:
        p, b = self.mld_point, self.bbox
        if p is not None and not (b.x_min <= p.x <= b.x_max and b.y_min <= p.y <= b.y_max):
            raise ValueError(f"mld_point {p.x, p.y} fuera de la caja {b.model_dump()}")
        return self


class Detection(BaseModel):
    """Caja predicha por el detector, con confianza y (opcional) MLD medido en su recorte."""

    model_config = ConfigDict(frozen=True)

    image_id: str
    bbox: BoundingBox
    confidence: float = Field(ge=0.0, le=1.0)
    mld_px: float | None = Field(default=None, gt=0)


class ImageRecord(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    path: str
    width: int = Field(ge=1)
    height: int = Field(ge=1)
    lesions: list[LesionAnnotation] = Field(default_factory=list)
    provenance: dict[str, Any] | None = None

    @model_validator(mode="after")
    def _lesions_in_bounds(self) -> ImageRecord:
        for lesion in self.lesions:
            b = lesion.bbox
            if b.x_max > self.width or b.y_max > self.height:
                raise ValueError(f"la caja {b.model_dump()} excede la imagen {self.id} ({self.width}x{self.height})")
        return self


class DatasetManifest(BaseModel):
    model_config = ConfigDict(frozen=True)

    images: list[ImageRecord]

    @model_validator(mode="after")
    def _unique_ids(self) -> DatasetManifest:
        ids = [img.id for img in self.images]
        if len(ids) != len(set(ids)):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"ids de imagen duplicados: {dupes}")
        return self

    def by_id(self) -> dict[str, ImageRecord]:
        return {img.id: img for img in self.images}


class CropContext(BaseModel):
    """Transformación afín del recorte: x_recorte = (x - offset_x) * scale_x."""

    model_config = ConfigDict(frozen=True)

    offset_x: float = 0.0
    offset_y: float = 0.0
    scale_x: float = Field(default=1.0, gt=0)
    scale_y: float = Field(default=1.0, gt=0)

    def forward(self, p: Point) -> Point:
        return Point(x=(p.x - self.offset_x) * self.scale_x, y=(p.y - self.offset_y) * self.scale_y)
