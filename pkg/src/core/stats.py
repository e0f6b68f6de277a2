"""
Estadística: U de Mann-Whitney, intervalos bootstrap, Bland-Altman y
acuerdo de severidad con umbrales (MLD predicho vs. de referencia).
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.stats import norm
from sklearn.metrics import confusion_matrix

from src.core.errors import EmptySampleError, LengthMismatchError, UndefinedMetricError

logger = logging.getLogger(__name__)

# --- PARÁMETROS ---
EXACT_LIMIT = 10_000  # n*m hasta el cual el p-valor se enumera exactamente
LOA_MULTIPLIER = 1.96
BOOTSTRAP_ITERS = 1000
GT_THRESHOLD_PX = 4.0
PRED_THRESHOLD_PX = 6.0


# =========================
# MANN-WHITNEY
# =========================
@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_value: float
    n: int
    m: int
    method: str

    @property
    def u_complement(self) -> float:
        """U de la muestra y (n*m - U con la convención de empates)."""
        return self.n * self.m - self.u


def _as_sample(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).ravel()
    if arr.size == 0:
        raise EmptySampleError(f"la muestra {name} está vacía")
    return arr


def _u_statistic(x: np.ndarray, y: np.ndarray, strict: bool = False) -> float:
    # U = #(x_i < y_j) + 0.5 * #(x_i == y_j); en modo estricto los empates valen 0
    ys = np.sort(y)
    right = np.searchsorted(ys, x, side="right")
    left = np.searchsorted(ys, x, side="left")
    greater = (ys.size - right).sum()
    if strict:
        return float(greater)
    return float(greater + 0.5 * (right - left).sum())


def exact_p_value(x: np.ndarray, y: np.ndarray) -> float:
    """
    P-valor bilateral exacto bajo la distribución de permutación de U.

    Con empates la distribución es la condicional a los grupos empatados. Se
    construye por programación dinámica sobre los grupos de valores ordenados:
    estado (x elegidos hasta ahora, 2U acumulado).
    """
    n, m = x.size, y.size
    _, groups = np.unique(np.concatenate([x, y]), return_counts=True)
    width = 2 * n * m + 1
    dist = np.zeros((n + 1, width))
    dist[0, 0] = 1.0
    seen = 0
    for t in groups.tolist():
        nxt = np.zeros_like(dist)
        for k in range(n + 1):
            row = dist[k]
            if not row.any():
                continue
            # los t - j valores y del grupo no pueden exceder los y restantes
            y_left = m - (seen - k)
            for j in range(max(0, t - y_left), min(t, n - k) + 1):
                # cada y del grupo tiene k x menores y j x empatados
                shift = (t - j) * (2 * k + j)
                nxt[k + j, shift:] += math.comb(t, j) * row[: width - shift]
        dist = nxt
        seen += t

    counts = dist[n]
    two_u = int(round(2 * _u_statistic(x, y)))
    deviation = np.abs(np.arange(width) - n * m)
    tail = counts[deviation >= abs(two_u - n * m)].sum()
    return float(min(1.0, tail / math.comb(n + m, n)))


def normal_p_value(x: np.ndarray, y: np.ndarray) -> float:
    """Aproximación normal con corrección de continuidad y de empates."""
    n, m = x.size, y.size
    total = n + m
    _, groups = np.unique(np.concatenate([x, y]), return_counts=True)
    tie_term = float((groups.astype(float) ** 3 - groups).sum()) / (total * (total - 1)) if total > 1 else 0.0
    sigma = math.sqrt(n * m / 12.0 * ((total + 1) - tie_term))
    if sigma == 0:
        return 1.0
    z = max(0.0, abs(_u_statistic(x, y) - n * m / 2.0) - 0.5) / sigma
    return float(min(1.0, 2.0 * norm.sf(z)))


def mann_whitney_u(x: Sequence[float], y: Sequence[float], strict: bool = False) -> MannWhitneyResult:
    """
    Prueba U de Mann-Whitney bilateral.

    U cuenta los pares con x_i < y_j; los empates suman 0.5 salvo con
    `strict=True`, que reproduce la desigualdad estricta literal. El p-valor
    siempre usa la convención 0.5: exacto si n*m <= 10 000, normal si no.

    Raises:
        EmptySampleError: si alguna muestra está vacía.
    """
    xs, ys = _as_sample(x, "x"), _as_sample(y, "y")
    if xs.size * ys.size <= EXACT_LIMIT:
        p_value, method = exact_p_value(xs, ys), "exact"
    else:
        p_value, method = normal_p_value(xs, ys), "normal"
    return MannWhitneyResult(
        u=_u_statistic(xs, ys, strict=strict), p_value=p_value, n=xs.size, m=ys.size, method=method
    )


# =========================
# BOOTSTRAP
# =========================
def bootstrap_ci(
    values: Sequence | np.ndarray,
    statistic: Callable[[np.ndarray], float | np.ndarray],
    iters: int = BOOTSTRAP_ITERS,
    level: float = 0.95,
    seed: int = 0,
):
    """
    Intervalo bootstrap por percentiles.

    Los índices de remuestreo se generan de una vez desde `seed`, por lo que
    el resultado es reproducible. `statistic` puede devolver un escalar o un
    vector; una remuestra con valor NaN (métrica indefinida) se descarta.

    Returns:
        (lo, hi) como floats, o como arreglos si la estadística es vectorial.

    Raises:
        EmptySampleError: `values` vacío.
        UndefinedMetricError: la estadística es indefinida en todas las remuestras.
    """
    data = np.asarray(values)
    if data.shape[0] == 0:
        raise EmptySampleError("no hay valores para el bootstrap")
    if not 0 < level < 1:
        raise ValueError(f"nivel de confianza fuera de (0, 1): {level}")

    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.shape[0], size=(iters, data.shape[0]))
    stats = np.array([statistic(data[i]) for i in idx], dtype=float)

    valid = ~np.isnan(stats) if stats.ndim == 1 else ~np.isnan(stats).any(axis=1)
    if not valid.any():
        raise UndefinedMetricError("la estadística es indefinida en todas las remuestras")
    if not valid.all():
        logger.debug("bootstrap: %d de %d remuestras descartadas", int((~valid).sum()), iters)

    lo, hi = np.percentile(stats[valid], [100 * (1 - level) / 2, 100 * (1 + level) / 2], axis=0)
    if stats.ndim == 1:
        return float(lo), float(hi)
    return lo, hi


# =========================
# BLAND-ALTMAN
# =========================
class BlandAltmanResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean_diff: float
    sd: float
    loa_low: float
    loa_high: float
    mad: float
    abs_sd: float
    means: list[float]
    diffs: list[float]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"mean": self.means, "diff": self.diffs})


def _paired(pred: Sequence[float], gt: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    p, g = np.asarray(pred, dtype=float).ravel(), np.asarray(gt, dtype=float).ravel()
    if p.size != g.size:
        raise LengthMismatchError(f"{p.size} predicciones para {g.size} referencias")
    if p.size < 2:
        raise EmptySampleError(f"se requieren al menos 2 pares, hay {p.size}")
    return p, g


def bland_altman(pred: Sequence[float], gt: Sequence[float]) -> BlandAltmanResult:
    p, g = _paired(pred, gt)
    diffs = p - g
    mean_diff = float(diffs.mean())
    sd = float(diffs.std(ddof=1))
    return BlandAltmanResult(
        mean_diff=mean_diff,
        sd=sd,
        loa_low=mean_diff - LOA_MULTIPLIER * sd,
        loa_high=mean_diff + LOA_MULTIPLIER * sd,
        mad=float(np.abs(diffs).mean()),
        abs_sd=float(np.abs(diffs).std(ddof=1)),
        means=((p + g) / 2).tolist(),
        diffs=diffs.tolist(),
    )


# =========================
# ACUERDO DE SEVERIDAD
# =========================
class AgreementReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    gt_thresh: float
    pred_thresh: float
    mad: float
    sd: float
    abs_sd: float
    mean_diff: float
    loa_low: float
    loa_high: float
    prec: float
    rec: float
    f1: float
    bal_acc: float
    prec_ci: tuple[float, float]
    rec_ci: tuple[float, float]
    f1_ci: tuple[float, float]
    bal_acc_ci: tuple[float, float]
    tp: int
    fp: int
    fn: int
    tn: int

    @model_validator(mode="after")
    def _ordered(self) -> AgreementReport:
        if not self.loa_low <= self.mean_diff <= self.loa_high:
            raise ValueError("límites de acuerdo desordenados")
        for name in ("prec_ci", "rec_ci", "f1_ci", "bal_acc_ci"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} con límite inferior mayor que el superior")
        return self


def _confusion(gt_pos: np.ndarray, pred_pos: np.ndarray) -> tuple[int, int, int, int]:
    tn, fp, fn, tp = confusion_matrix(gt_pos, pred_pos, labels=[False, True]).ravel()
    return int(tp), int(fp), int(fn), int(tn)


def _scores(tp: int, fp: int, fn: int, tn: int) -> np.ndarray:
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn)
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    bal_acc = (rec + tn / (tn + fp)) / 2
    return np.array([prec, rec, f1, bal_acc])


def severity_agreement(
    pred_mlds: Sequence[float],
    gt_mlds: Sequence[float],
    gt_thresh: float = GT_THRESHOLD_PX,
    pred_thresh: float = PRED_THRESHOLD_PX,
    iters: int = BOOTSTRAP_ITERS,
    level: float = 0.95,
    seed: int = 0,
) -> AgreementReport:
    """
    Acuerdo entre MLD predichos y de referencia.

    Una lesión es positiva (severa) si su MLD de referencia es <= gt_thresh;
    la predicción es positiva si el MLD predicho es <= pred_thresh. Los IC
    remuestrean los pares crudos y vuelven a binarizar en cada remuestra.

    Raises:
        LengthMismatchError: listas de distinto largo.
        UndefinedMetricError: la referencia tiene una sola clase.
    """
    p, g = _paired(pred_mlds, gt_mlds)
    gt_pos, pred_pos = g <= gt_thresh, p <= pred_thresh
    if gt_pos.all() or not gt_pos.any():
        raise UndefinedMetricError("la referencia tiene una sola clase; la exactitud balanceada es indefinida")

    tp, fp, fn, tn = _confusion(gt_pos, pred_pos)
    point = _scores(tp, fp, fn, tn)
    if tp + fp == 0:
        logger.warning("Ninguna predicción positiva: la precisión se reporta como 0")

    def resampled(pairs: np.ndarray) -> np.ndarray:
        positives = pairs[:, 1] <= gt_thresh
        if positives.all() or not positives.any():
            return np.full(4, np.nan)
        return _scores(*_confusion(positives, pairs[:, 0] <= pred_thresh))

    lo, hi = bootstrap_ci(np.column_stack([p, g]), resampled, iters=iters, level=level, seed=seed)
    ba = bland_altman(p, g)
    return AgreementReport(
        n=p.size,
        gt_thresh=gt_thresh,
        pred_thresh=pred_thresh,
        mad=ba.mad,
        sd=ba.sd,
        abs_sd=ba.abs_sd,
        mean_diff=ba.mean_diff,
        loa_low=ba.loa_low,
        loa_high=ba.loa_high,
        prec=float(point[0]),
        rec=float(point[1]),
        f1=float(point[2]),
        bal_acc=float(point[3]),
        prec_ci=(float(lo[0]), float(hi[0])),
        rec_ci=(float(lo[1]), float(hi[1])),
        f1_ci=(float(lo[2]), float(hi[2])),
        bal_acc_ci=(float(lo[3]), float(hi[3])),
        tp=tp,
        fp=fp,
        fn=fn,
        tn=tn,
    )
