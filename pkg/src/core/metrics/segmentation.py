"""Métricas de segmentación: píxel, clDice y distancia de Hausdorff modificada."""

from __future__ import annotations

import logging
import math

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import ndimage

from src.core.errors import DimensionMismatchError, EmptyMaskError
from src.core.morphology import skeletonize
from src.core.types import BinaryMask

logger = logging.getLogger(__name__)

SCORE_COLUMNS = ["acc", "prec", "rec", "dice", "iou", "cldice", "mhd"]


class PixelScores(BaseModel):
    model_config = ConfigDict(frozen=True)

    acc: float
    prec: float
    rec: float
    dice: float
    iou: float


class SegScore(PixelScores):
    """Puntaje de un par de máscaras; mhd es None si alguna está vacía."""

    cldice: float
    mhd: float | None = None

    def as_row(self) -> dict[str, float]:
        row = self.model_dump()
        row["mhd"] = math.nan if self.mhd is None else self.mhd
        return {k: row[k] for k in SCORE_COLUMNS}


def _check_dims(pred: BinaryMask, gt: BinaryMask) -> None:
    if pred.shape != gt.shape:
        raise DimensionMismatchError(f"dimensiones distintas: pred {pred.shape} vs gt {gt.shape}")


def pixel_metrics(pred: BinaryMask, gt: BinaryMask) -> PixelScores:
    """
    Razones de la matriz de confusión por píxel.

    Convenciones con máscaras vacías: ambas vacías -> todo 1.0; una razón con
    denominador cero en otro caso -> 0.0.
    """
    _check_dims(pred, gt)
    p, g = pred.data, gt.data
    tp = int((p & g).sum())
    fp = int((p & ~g).sum())
    fn = int((~p & g).sum())
    tn = p.size - tp - fp - fn

    if tp + fp + fn == 0:
        return PixelScores(acc=1.0, prec=1.0, rec=1.0, dice=1.0, iou=1.0)
    return PixelScores(
        acc=(tp + tn) / p.size,
        prec=tp / (tp + fp) if tp + fp else 0.0,
        rec=tp / (tp + fn) if tp + fn else 0.0,
        dice=2 * tp / (2 * tp + fp + fn),
        iou=tp / (tp + fp + fn),
    )


def cl_dice(pred: BinaryMask, gt: BinaryMask) -> float:
    """clDice: media armónica de precisión y sensibilidad topológicas (contra máscaras completas)."""
    _check_dims(pred, gt)
    if pred.is_empty() and gt.is_empty():
        return 1.0
    if pred.is_empty() or gt.is_empty():
        return 0.0

    skel_pred = skeletonize(pred).data
    skel_gt = skeletonize(gt).data
    t_prec = (skel_pred & gt.data).sum() / skel_pred.sum()
    t_sens = (skel_gt & pred.data).sum() / skel_gt.sum()
    if t_prec + t_sens == 0:
        return 0.0
    return float(2 * t_prec * t_sens / (t_prec + t_sens))


def _directed_mean(source: np.ndarray, target: np.ndarray) -> float:
    # Distancia de cada píxel al píxel de target más cercano (EDT del complemento, sin marco)
    to_target = ndimage.distance_transform_edt(~target)
    return float(to_target[source].mean())


def mhd(pred: BinaryMask, gt: BinaryMask) -> float:
    """
    Distancia de Hausdorff modificada: el mayor de los dos promedios dirigidos
    de distancia al punto más cercano del otro conjunto.

    Raises:
        EmptyMaskError: alguna máscara vacía.
    """
    _check_dims(pred, gt)
    if pred.is_empty() or gt.is_empty():
        raise EmptyMaskError("MHD indefinida con máscaras vacías")
    return max(_directed_mean(pred.data, gt.data), _directed_mean(gt.data, pred.data))


def score_pair(pred: BinaryMask, gt: BinaryMask) -> SegScore:
    pixels = pixel_metrics(pred, gt)
    try:
        distance = mhd(pred, gt)
    except EmptyMaskError:
        logger.warning("MHD indefinida para un par con máscara vacía")
        distance = None
    return SegScore(**pixels.model_dump(), cldice=cl_dice(pred, gt), mhd=distance)
