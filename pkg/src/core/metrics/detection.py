"""
Evaluación de detecciones: emparejamiento por IoU, AP/mAP con agregación por
imagen y por lesión, métricas por contención del MLD, análisis de CTP y
fitness.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from src.core.errors import (
    EmptySampleError,
    InputError,
    LengthMismatchError,
    MissingMldPointError,
    UndefinedMetricError,
    UnknownImageError,
)
from src.core.geometry import bbox_contains, iou_matrix
from src.core.stats import mann_whitney_u
from src.core.types import DatasetManifest, Detection, LesionAnnotation

logger = logging.getLogger(__name__)

# --- UMBRALES ---
IOU_THRESHOLDS = tuple(round(0.50 + 0.05 * k, 2) for k in range(10))
RECALL_GRID = np.linspace(0.0, 1.0, 101)
CTP_ALPHA = 0.05

CtpMode = Literal["ctp_as_fp", "ctp_as_tp"]


# =========================
# TIPOS
# =========================
@dataclass
class MatchOutcome:
    """Resultado de emparejar detecciones con anotaciones."""

    matches: list[tuple[Detection, LesionAnnotation, float]] = field(default_factory=list)
    fp_detections: list[Detection] = field(default_factory=list)
    fn_annotations: list[LesionAnnotation] = field(default_factory=list)
    # Detecciones en orden de confianza con su marca de TP
    ranked: list[tuple[Detection, bool]] = field(default_factory=list)
    iou_thresh: float | None = None

    @property
    def tp(self) -> int:
        return len(self.matches)

    @property
    def fp(self) -> int:
        return len(self.fp_detections)

    @property
    def fn(self) -> int:
        return len(self.fn_annotations)


class EvalSummary(BaseModel):
    """Métricas de un nivel de agregación; None = indefinida (se emite null)."""

    model_config = ConfigDict(frozen=True)

    level: Literal["image", "lesion"]
    precision: float | None = None
    recall: float | None = None
    map50: float | None = None
    map5095: float | None = None
    # Solo nivel imagen: desviación estándar e imágenes que aportan a cada media
    precision_sd: float | None = None
    recall_sd: float | None = None
    map50_sd: float | None = None
    map5095_sd: float | None = None
    support: dict[str, int] = {}


class MldEvalResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    mld_precision: float
    mld_recall: float
    mld_f1: float
    tp: int
    fp: int
    fn: int
    ctp_count: int = 0
    mode: CtpMode = "ctp_as_fp"

    @model_validator(mode="after")
    def _harmonic(self) -> MldEvalResult:
        p, r = self.mld_precision, self.mld_recall
        expected = 0.0 if p + r == 0 else 2 * p * r / (p + r)
        if abs(self.mld_f1 - expected) > 1e-12:
            raise ValueError("F1 no es la media armónica de precisión y recall")
        return self


class CtpAnalysis(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    flags: list[bool]
    p_values: list[float]
    ctp_count: int
    ctp_as_fp: MldEvalResult | None = None
    ctp_as_tp: MldEvalResult | None = None


# =========================
# EMPAREJAMIENTO
# =========================
def _by_confidence(dets: Sequence[Detection]) -> list[Detection]:
    # Orden estable: empates conservan el orden de entrada
    return sorted(dets, key=lambda d: -d.confidence)


def match_at_iou(dets: Sequence[Detection], gts: Sequence[LesionAnnotation], iou_thresh: float) -> MatchOutcome:
    """
    Emparejamiento codicioso por confianza descendente.

    Cada detección toma la anotación libre de mayor IoU si llega al umbral
    (empate: la de menor índice); las detecciones sin pareja son FP y las
    anotaciones libres, FN.
    """
    if not 0 < iou_thresh < 1:
        raise InputError(f"umbral de IoU fuera de (0, 1): {iou_thresh}")

    ordered = _by_confidence(dets)
    ious = iou_matrix(
        np.array([d.bbox.as_array() for d in ordered]).reshape(-1, 4),
        np.array([g.bbox.as_array() for g in gts]).reshape(-1, 4),
    )
    taken = np.zeros(len(gts), dtype=bool)
    outcome = MatchOutcome(iou_thresh=iou_thresh)
    for i, det in enumerate(ordered):
        best = -1
        if len(gts):
            candidates = np.where(taken, -1.0, ious[i])
            best = int(np.argmax(candidates))
            if candidates[best] < iou_thresh:
                best = -1
        if best >= 0:
            taken[best] = True
            outcome.matches.append((det, gts[best], float(ious[i, best])))
            outcome.ranked.append((det, True))
        else:
            outcome.fp_detections.append(det)
            outcome.ranked.append((det, False))
    outcome.fn_annotations = [g for g, t in zip(gts, taken) if not t]
    return outcome


def merge_outcomes(outcomes: Sequence[MatchOutcome]) -> MatchOutcome:
    """Une resultados de varias imágenes; el ranking global se reordena por confianza."""
    merged = MatchOutcome(iou_thresh=outcomes[0].iou_thresh if outcomes else None)
    for o in outcomes:
        merged.matches.extend(o.matches)
        merged.fp_detections.extend(o.fp_detections)
        merged.fn_annotations.extend(o.fn_annotations)
        merged.ranked.extend(o.ranked)
    merged.ranked.sort(key=lambda item: -item[0].confidence)
    return merged


# =========================
# AP / mAP
# =========================
def average_precision(outcomes: Sequence[MatchOutcome]) -> float:
    """
    AP interpolado en 101 puntos de recall (0.00..1.00), con envolvente de
    precisión, sobre la curva PR ordenada por confianza.

    Raises:
        UndefinedMetricError: si no hay anotaciones de referencia.
    """
    merged = merge_outcomes(outcomes)
    n_gt = merged.tp + merged.fn
    if n_gt == 0:
        raise UndefinedMetricError("AP indefinido: no hay anotaciones de referencia")
    if not merged.ranked:
        return 0.0

    hits = np.array([is_tp for _, is_tp in merged.ranked], dtype=float)
    tp_cum = np.cumsum(hits)
    fp_cum = np.cumsum(1.0 - hits)
    recall = tp_cum / n_gt
    precision = tp_cum / (tp_cum + fp_cum)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]

    idx = np.searchsorted(recall, RECALL_GRID, side="left")
    sampled = np.where(idx < envelope.size, envelope[np.minimum(idx, envelope.size - 1)], 0.0)
    return float(sampled.mean())


def fitness(map50: float, map5095: float) -> float:
    """Fitness del detector: 0.9 * mAP@0.50-0.95 + 0.1 * mAP@0.50."""
    if not (0 <= map50 <= 1 and 0 <= map5095 <= 1):
        raise InputError(f"mAP fuera de [0, 1]: {map50}, {map5095}")
    return 0.9 * map5095 + 0.1 * map50


def _mean_sd(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return float(arr.mean()), sd


def map_suite(dets: Sequence[Detection], manifest: DatasetManifest) -> tuple[EvalSummary, EvalSummary]:
    """
    Suite de detección a dos niveles.

    Nivel lesión: totales sobre todas las imágenes. Nivel imagen: media y
    desviación estándar de las métricas por imagen. La precisión por imagen
    solo se promedia sobre imágenes con al menos una detección; recall y AP
    por imagen solo sobre imágenes con al menos una anotación.

    Raises:
        UnknownImageError: una detección apunta a un id fuera del manifiesto.
        UndefinedMetricError: el manifiesto no tiene anotaciones.
    """
    by_id = manifest.by_id()
    per_image: dict[str, list[Detection]] = defaultdict(list)
    for det in dets:
        if det.image_id not in by_id:
            raise UnknownImageError(f"detección con image_id desconocido: {det.image_id!r}")
        per_image[det.image_id].append(det)

    image_ids = sorted(by_id)
    if sum(len(by_id[i].lesions) for i in image_ids) == 0:
        raise UndefinedMetricError("el manifiesto no tiene anotaciones; mAP y recall son indefinidos")

    outcomes = {
        t: [match_at_iou(per_image[i], by_id[i].lesions, t) for i in image_ids] for t in IOU_THRESHOLDS
    }

    # Nivel lesión
    at50 = merge_outcomes(outcomes[0.5])
    aps = [average_precision(outcomes[t]) for t in IOU_THRESHOLDS]
    lesion = EvalSummary(
        level="lesion",
        precision=at50.tp / (at50.tp + at50.fp) if at50.tp + at50.fp else None,
        recall=at50.tp / (at50.tp + at50.fn),
        map50=aps[0],
        map5095=float(np.mean(aps)),
        support={"images": len(image_ids), "detections": len(dets), "lesions": at50.tp + at50.fn},
    )

    # Nivel imagen
    precisions, recalls, map50s, map5095s = [], [], [], []
    for k, image_id in enumerate(image_ids):
        o = outcomes[0.5][k]
        if o.tp + o.fp:
            precisions.append(o.tp / (o.tp + o.fp))
        if o.tp + o.fn:
            recalls.append(o.tp / (o.tp + o.fn))
            image_aps = [average_precision([outcomes[t][k]]) for t in IOU_THRESHOLDS]
            map50s.append(image_aps[0])
            map5095s.append(float(np.mean(image_aps)))

    p_mean, p_sd = _mean_sd(precisions)
    r_mean, r_sd = _mean_sd(recalls)
    m50, m50_sd = _mean_sd(map50s)
    m95, m95_sd = _mean_sd(map5095s)
    image = EvalSummary(
        level="image",
        precision=p_mean,
        recall=r_mean,
        map50=m50,
        map5095=m95,
        precision_sd=p_sd,
        recall_sd=r_sd,
        map50_sd=m50_sd,
        map5095_sd=m95_sd,
        support={"precision": len(precisions), "recall": len(recalls), "map": len(map50s)},
    )
    if not precisions:
        logger.info("Ninguna imagen tiene detecciones: la precisión por imagen queda indefinida")
    return image, lesion


# =========================
# MÉTRICAS POR MLD
# =========================
def mld_match(dets: Sequence[Detection], gts: Sequence[LesionAnnotation]) -> MatchOutcome:
    """
    TP: caja predicha que contiene el punto MLD de una anotación libre
    (codicioso por confianza; si contiene varios, gana la anotación de mayor
    IoU y luego la de menor índice). FP: caja sin MLD libre. FN: anotación
    cuyo MLD no quedó en ninguna caja emparejada.

    Raises:
        MissingMldPointError: alguna anotación no tiene mld_point.
    """
    missing = [i for i, g in enumerate(gts) if g.mld_point is None]
    if missing:
        raise MissingMldPointError(f"anotaciones sin mld_point en las posiciones {missing}")

    ordered = _by_confidence(dets)
    ious = iou_matrix(
        np.array([d.bbox.as_array() for d in ordered]).reshape(-1, 4),
        np.array([g.bbox.as_array() for g in gts]).reshape(-1, 4),
    )
    taken = [False] * len(gts)
    outcome = MatchOutcome()
    for i, det in enumerate(ordered):
        free = [j for j, g in enumerate(gts) if not taken[j] and bbox_contains(det.bbox, g.mld_point)]
        if free:
            best = max(free, key=lambda j: (ious[i, j], -j))
            taken[best] = True
            outcome.matches.append((det, gts[best], float(ious[i, best])))
            outcome.ranked.append((det, True))
        else:
            outcome.fp_detections.append(det)
            outcome.ranked.append((det, False))
    outcome.fn_annotations = [g for g, t in zip(gts, taken) if not t]
    return outcome


def _mld_result(tp: int, fp: int, fn: int, ctp_count: int, mode: CtpMode) -> MldEvalResult:
    if tp + fp == 0:
        raise UndefinedMetricError("MLD-precision indefinida: no hay detecciones")
    if tp + fn == 0:
        raise UndefinedMetricError("MLD-recall indefinido: no hay anotaciones")
    precision, recall = tp / (tp + fp), tp / (tp + fn)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return MldEvalResult(
        mld_precision=precision, mld_recall=recall, mld_f1=f1, tp=tp, fp=fp, fn=fn, ctp_count=ctp_count, mode=mode
    )


def mld_metrics(m: MatchOutcome, ctp_count: int = 0, mode: CtpMode = "ctp_as_fp") -> MldEvalResult:
    """
    MLD-precision, MLD-recall y MLD-F1.

    Con `mode="ctp_as_tp"` los `ctp_count` candidatos pasan de FP a TP; FN no cambia.
    """
    if not 0 <= ctp_count <= m.fp:
        raise InputError(f"ctp_count={ctp_count} fuera de [0, {m.fp}]")
    if mode == "ctp_as_tp":
        return _mld_result(m.tp + ctp_count, m.fp - ctp_count, m.fn, ctp_count, mode)
    return _mld_result(m.tp, m.fp, m.fn, ctp_count, mode)


def ctp_analysis(
    fp_mlds: Sequence[float],
    gt_mlds: Sequence[float],
    alpha: float = CTP_ALPHA,
    outcome: MatchOutcome | None = None,
) -> CtpAnalysis:
    """
    Marca como candidato a verdadero positivo (CTP) cada FP cuyo MLD es
    compatible con la distribución de MLD de referencia: U de Mann-Whitney
    bilateral de {fp_mld} contra gt_mlds con p > alpha.

    Si se pasa `outcome`, se recalculan las métricas con los CTP como FP y
    como TP; `fp_mlds` debe seguir el orden de `outcome.fp_detections`.

    Raises:
        EmptySampleError: gt_mlds vacío.
        LengthMismatchError: fp_mlds no coincide con los FP de `outcome`.
    """
    if len(gt_mlds) == 0:
        raise EmptySampleError("la distribución de MLD de referencia está vacía")
    if outcome is not None and len(fp_mlds) != outcome.fp:
        raise LengthMismatchError(f"{len(fp_mlds)} MLD para {outcome.fp} falsos positivos")

    p_values = [mann_whitney_u([v], gt_mlds).p_value for v in fp_mlds]
    flags = [p > alpha for p in p_values]
    ctp_count = sum(flags)
    logger.debug("CTP: %d de %d FP (alpha=%.3f)", ctp_count, len(flags), alpha)

    as_fp = as_tp = None
    if outcome is not None:
        as_fp = mld_metrics(outcome, ctp_count, "ctp_as_fp")
        as_tp = mld_metrics(outcome, ctp_count, "ctp_as_tp")
    return CtpAnalysis(
        alpha=alpha, flags=flags, p_values=p_values, ctp_count=ctp_count, ctp_as_fp=as_fp, ctp_as_tp=as_tp
    )
