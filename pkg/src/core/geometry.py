"""Geometría de cajas y el pegamento recorte/redimensionado entre detección y segmentación."""

import logging

import cv2
import numpy as np

from src.core.errors import DegenerateCropError
from src.core.types import BinaryMask, BoundingBox, CropContext, GrayImage, Point

logger = logging.getLogger(__name__)


def bbox_iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersección sobre unión de dos cajas; 0 si son disjuntas."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    return float(inter / (a.area + b.area - inter))


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """
    IoU entre dos conjuntos de cajas (x1, y1, x2, y2).

    Args:
        boxes_a: Arreglo [N, 4].
        boxes_b: Arreglo [M, 4].

    Returns:
        Matriz [N, M] con IoU[i, j] entre boxes_a[i] y boxes_b[j].
    """
    boxes_a = np.asarray(boxes_a, dtype=float).reshape(-1, 4)
    boxes_b = np.asarray(boxes_b, dtype=float).reshape(-1, 4)
    if boxes_a.shape[0] == 0 or boxes_b.shape[0] == 0:
        return np.zeros((boxes_a.shape[0], boxes_b.shape[0]))

    area_a = (boxes_a[:, 2] - boxes_a[:, 0]) * (boxes_a[:, 3] - boxes_a[:, 1])
    area_b = (boxes_b[:, 2] - boxes_b[:, 0]) * (boxes_b[:, 3] - boxes_b[:, 1])

    lt = np.maximum(boxes_a[:, None, :2], boxes_b[None, :, :2])
    rb = np.minimum(boxes_a[:, None, 2:], boxes_b[None, :, 2:])
    wh = np.clip(rb - lt, 0, None)
    inter = wh[..., 0] * wh[..., 1]

    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def bbox_contains(b: BoundingBox, p: Point) -> bool:
    # Caja cerrada: el borde cuenta como dentro
    return b.x_min <= p.x <= b.x_max and b.y_min <= p.y <= b.y_max


def _clip_box(b: BoundingBox, width: int, height: int) -> tuple[float, float, float, float]:
    x0, y0 = max(0.0, b.x_min), max(0.0, b.y_min)
    x1, y1 = min(float(width), b.x_max), min(float(height), b.y_max)
    if x1 - x0 <= 0 or y1 - y0 <= 0:
        raise DegenerateCropError(f"la caja {b.model_dump()} recortada a {width}x{height} queda vacía")
    return x0, y0, x1, y1


def crop_resize(img: GrayImage, b: BoundingBox, out_w: int, out_h: int) -> tuple[GrayImage, CropContext]:
    """
    Recorta la caja (recortada a los límites de la imagen) y la remuestrea
    bilinealmente a out_w x out_h.

    La esquina superior izquierda de la caja va al píxel (0, 0) del recorte y
    cada eje se escala por out / ancho_caja, de modo que el contexto devuelto
    es la afín exacta que usó el remuestreo.

    Raises:
        DegenerateCropError: si la caja recortada no tiene área.
    """
    if out_w < 1 or out_h < 1:
        raise DegenerateCropError(f"tamaño de salida inválido: {out_w}x{out_h}")
    x0, y0, x1, y1 = _clip_box(b, img.width, img.height)
    sx, sy = out_w / (x1 - x0), out_h / (y1 - y0)

    warp = np.array([[sx, 0.0, -sx * x0], [0.0, sy, -sy * y0]])
    pixels = cv2.warpAffine(
        img.pixels, warp, (out_w, out_h), flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_REPLICATE
    )
    ctx = CropContext(offset_x=x0, offset_y=y0, scale_x=sx, scale_y=sy)
    logger.debug("crop_resize %s -> %dx%d (escala %.4f, %.4f)", (x0, y0, x1, y1), out_w, out_h, sx, sy)
    return GrayImage(pixels), ctx


def crop_resize_mask(mask: BinaryMask, b: BoundingBox, out_w: int, out_h: int) -> tuple[BinaryMask, CropContext]:
    """Igual que crop_resize pero con vecino más cercano, para máscaras."""
    if out_w < 1 or out_h < 1:
        raise DegenerateCropError(f"tamaño de salida inválido: {out_w}x{out_h}")
    x0, y0, x1, y1 = _clip_box(b, mask.width, mask.height)
    sx, sy = out_w / (x1 - x0), out_h / (y1 - y0)
    warp = np.array([[sx, 0.0, -sx * x0], [0.0, sy, -sy * y0]])
    data = cv2.warpAffine(
        mask.data.astype(np.uint8), warp, (out_w, out_h), flags=cv2.INTER_NEAREST, borderMode=cv2.BORDER_REPLICATE
    )
    return BinaryMask(data > 0), CropContext(offset_x=x0, offset_y=y0, scale_x=sx, scale_y=sy)


def resize_mask(mask: BinaryMask, out_w: int, out_h: int) -> BinaryMask:
    if (mask.width, mask.height) == (out_w, out_h):
        return mask
    data = cv2.resize(mask.data.astype(np.uint8), (out_w, out_h), interpolation=cv2.INTER_NEAREST)
    return BinaryMask(data > 0)


def uncrop_point(p: Point, ctx: CropContext) -> Point:
    """Inversa de la afín del recorte: coordenada del recorte -> coordenada de la imagen."""
    return Point(x=ctx.offset_x + p.x / ctx.scale_x, y=ctx.offset_y + p.y / ctx.scale_y)
