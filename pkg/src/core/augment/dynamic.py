"""
Nivel dinámico: transformaciones probabilísticas por época, en orden fijo
(escala, borrado, traslación, brillo/contraste, volteo horizontal), con
remapeo exacto de cajas y puntos MLD.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import cv2
import numpy as np

from src.core.augment.config import AugmentConfig
from src.core.augment.sample import AugmentedSample
from src.core.types import BinaryMask, BoundingBox, GrayImage, LesionAnnotation, Point

logger = logging.getLogger(__name__)


# =========================
# REMAPEO DE ANOTACIONES
# =========================
def affine_box(coords: np.ndarray, matrix: np.ndarray) -> np.ndarray:
    """Aplica una afín sin rotación a (x1, y1, x2, y2); sin recortar."""
    x = matrix[0, 0] * coords[[0, 2]] + matrix[0, 2]
    y = matrix[1, 1] * coords[[1, 3]] + matrix[1, 2]
    return np.array([x.min(), y.min(), x.max(), y.max()])


def remap_annotations(
    anns: Sequence[LesionAnnotation],
    matrix: np.ndarray,
    width: int,
    height: int,
    min_area_fraction: float = 0.25,
    min_side: float = 0.0,
    point_matrix: np.ndarray | None = None,
) -> tuple[LesionAnnotation, ...]:
    """
    Remapea cajas y puntos MLD con `matrix` (2x3, sin rotación) y recorta al
    lienzo. Se descartan cajas que conservan menos de `min_area_fraction` de
    su área remapeada o con algún lado menor a `min_side`. Un MLD que queda
    fuera de la caja recortada se pierde; mld_px se escala con el factor medio.

    `point_matrix` mapea los puntos MLD cuando difiere del de las cajas (los
    centros de píxel del volteo van de x a W - 1 - x).
    """
    scale = math.sqrt(abs(matrix[0, 0] * matrix[1, 1]))
    pm = matrix if point_matrix is None else point_matrix
    out = []
    for ann in anns:
        x1, y1, x2, y2 = affine_box(ann.bbox.as_array(), matrix)
        full = (x2 - x1) * (y2 - y1)
        cx1, cy1 = min(max(x1, 0.0), width), min(max(y1, 0.0), height)
        cx2, cy2 = min(max(x2, 0.0), width), min(max(y2, 0.0), height)
        w, h = cx2 - cx1, cy2 - cy1
        if w <= 0 or h <= 0 or w < min_side or h < min_side or w * h < min_area_fraction * full:
            continue

        box = BoundingBox(x_min=cx1, y_min=cy1, x_max=cx2, y_max=cy2)
        point = None
        if ann.mld_point is not None:
            px = pm[0, 0] * ann.mld_point.x + pm[0, 2]
            py = pm[1, 1] * ann.mld_point.y + pm[1, 2]
            if cx1 <= px <= cx2 and cy1 <= py <= cy2:
                point = Point(x=px, y=py)
        mld_px = ann.mld_px * scale if ann.mld_px is not None else None
        out.append(LesionAnnotation(bbox=box, mld_point=point, mld_px=mld_px))
    return tuple(out)


def _warp(sample: AugmentedSample, matrix: np.ndarray, min_area_fraction: float) -> AugmentedSample:
    w, h = sample.image.width, sample.image.height
    pixels = cv2.warpAffine(
        sample.image.pixels, matrix, (w, h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=0
    )
    mask = None
    if sample.mask is not None:
        warped = cv2.warpAffine(
            sample.mask.data.astype(np.uint8), matrix, (w, h), flags=cv2.INTER_NEAREST, borderMode=cv2.BORDER_CONSTANT
        )
        mask = BinaryMask(warped > 0)
    anns = remap_annotations(sample.annotations, matrix, w, h, min_area_fraction)
    return AugmentedSample(GrayImage(pixels), anns, sample.provenance, mask)


# =========================
# TRANSFORMACIONES
# =========================
def scale(sample: AugmentedSample, factor: float, min_area_fraction: float = 0.25) -> AugmentedSample:
    """Escala respecto del centro y recorta/rellena de vuelta al lienzo."""
    cx, cy = sample.image.width / 2.0, sample.image.height / 2.0
    matrix = np.array([[factor, 0.0, (1 - factor) * cx], [0.0, factor, (1 - factor) * cy]])
    return _warp(sample, matrix, min_area_fraction)


def translate(sample: AugmentedSample, tx: int, ty: int, min_area_fraction: float = 0.25) -> AugmentedSample:
    matrix = np.array([[1.0, 0.0, float(tx)], [0.0, 1.0, float(ty)]])
    return _warp(sample, matrix, min_area_fraction)


def hflip(sample: AugmentedSample) -> AugmentedSample:
    """Volteo horizontal: cajas x -> W - x; puntos MLD y píxeles x -> W - 1 - x."""
    w = sample.image.width
    matrix = np.array([[-1.0, 0.0, float(w)], [0.0, 1.0, 0.0]])
    point_matrix = np.array([[-1.0, 0.0, float(w - 1)], [0.0, 1.0, 0.0]])
    mask = BinaryMask(sample.mask.data[:, ::-1]) if sample.mask is not None else None
    anns = remap_annotations(
        sample.annotations, matrix, w, sample.image.height, min_area_fraction=0.0, point_matrix=point_matrix
    )
    return AugmentedSample(GrayImage(sample.image.pixels[:, ::-1]), anns, sample.provenance, mask)


def erase(sample: AugmentedSample, y: int, x: int, h: int, w: int) -> AugmentedSample:
    """Rellena el rectángulo con la media de la imagen; anotaciones intactas."""
    pixels = sample.image.pixels.copy()
    pixels[y : y + h, x : x + w] = int(round(float(sample.image.pixels.mean())))
    return AugmentedSample(GrayImage(pixels), sample.annotations, sample.provenance, sample.mask)


def jiggle(sample: AugmentedSample, brightness: float, contrast: float) -> AugmentedSample:
    bright = sample.image.pixels.astype(float) * brightness
    mean = bright.mean()
    pixels = np.clip(np.rint((bright - mean) * contrast + mean), 0, 255).astype(np.uint8)
    return AugmentedSample(GrayImage(pixels), sample.annotations, sample.provenance, sample.mask)


def _erase_rect(width: int, height: int, cfg: AugmentConfig, rng: np.random.Generator) -> tuple[int, int, int, int]:
    d = cfg.dynamic
    area = rng.uniform(*d.erase_area) * width * height
    aspect = math.exp(rng.uniform(math.log(d.erase_aspect[0]), math.log(d.erase_aspect[1])))
    h = min(height, max(1, int(round(math.sqrt(area * aspect)))))
    w = min(width, max(1, int(round(math.sqrt(area / aspect)))))
    y = int(rng.integers(0, height - h + 1))
    x = int(rng.integers(0, width - w + 1))
    return y, x, h, w


def apply_dynamic(
    sample: AugmentedSample,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    tag: str = "dynamic",
    seed: int = 0,
) -> AugmentedSample:
    """
    Aplica cada transformación dinámica con su probabilidad, en orden fijo.

    Cada paso consume primero un sorteo uniforme para decidir si se aplica y
    luego sus parámetros, así que la secuencia depende solo del flujo `rng`.
    """
    d = cfg.dynamic
    w, h = sample.image.width, sample.image.height
    ops = []

    if rng.random() < d.scale_p:
        factor = float(rng.uniform(*d.scale_range))
        sample = scale(sample, factor, d.min_area_fraction)
        ops.append(f"scale={factor:.4f}")
    if rng.random() < d.erase_p:
        y, x, eh, ew = _erase_rect(w, h, cfg, rng)
        sample = erase(sample, y, x, eh, ew)
        ops.append(f"erase={x},{y},{ew},{eh}")
    if rng.random() < d.translate_p:
        tx = int(round(rng.uniform(-d.translate_fraction, d.translate_fraction) * w))
        ty = int(round(rng.uniform(-d.translate_fraction, d.translate_fraction) * h))
        sample = translate(sample, tx, ty, d.min_area_fraction)
        ops.append(f"translate={tx},{ty}")
    if rng.random() < d.jiggle_p:
        b, c = float(rng.uniform(*d.brightness)), float(rng.uniform(*d.contrast))
        sample = jiggle(sample, b, c)
        ops.append(f"jiggle={b:.4f},{c:.4f}")
    if rng.random() < d.flip_p:
        sample = hflip(sample)
        ops.append("hflip")

    prov = sample.provenance.extend("dynamic", tag, seed, tuple(ops))
    return AugmentedSample(sample.image, sample.annotations, prov, sample.mask)
