"""
Estimación de severidad de la lesión sin QCA.

Flujo: máscara -> esqueleto -> camino más largo -> perfil de radios (EDT)
-> picos -> MLD, MAD y DS = (1 - MLD / MAD) * 100.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.signal import find_peaks

from src.core.errors import DegenerateMaskError, EmptyMaskError
from src.core.geometry import uncrop_point
from src.core.morphology import SkeletonPath, distance_transform, longest_path, skeletonize
from src.core.types import BinaryMask, CropContext, Point

logger = logging.getLogger(__name__)

# --- PARÁMETROS POR DEFECTO ---
MIN_PROMINENCE = 0.5
MIN_SEPARATION = 3
TRIM_FRACTION = 0.05
CLINICAL_THRESHOLD = 70.0


@dataclass(frozen=True, eq=False)
class RadiusProfile:
    """Radios arteriales (px) en el orden del camino central."""

    radii: np.ndarray
    path: SkeletonPath

    def __post_init__(self):
        radii = np.asarray(self.radii, dtype=float).copy()
        if radii.shape != (len(self.path),):
            raise ValueError(f"{radii.shape[0]} radios para un camino de {len(self.path)} puntos")
        radii.setflags(write=False)
        object.__setattr__(self, "radii", radii)

    def __len__(self) -> int:
        return self.radii.shape[0]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "index": np.arange(len(self)),
                "x": [p[0] for p in self.path.points],
                "y": [p[1] for p in self.path.points],
                "radius": self.radii,
            }
        )


class SeverityReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    mld_px: float = Field(gt=0)
    mad_px: float = Field(gt=0)
    ds_percent: float = Field(ge=0, le=100)
    mld_point: Point
    peak_indices: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _consistent(self) -> SeverityReport:
        if self.mld_px > self.mad_px:
            raise ValueError(f"MLD {self.mld_px} mayor que MAD {self.mad_px}")
        expected = (1.0 - self.mld_px / self.mad_px) * 100.0
        if not math.isclose(self.ds_percent, expected, abs_tol=1e-9):
            raise ValueError(f"DS {self.ds_percent} no coincide con (1 - MLD/MAD) * 100 = {expected}")
        return self

    def is_significant(self, threshold: float = CLINICAL_THRESHOLD) -> bool:
        """True si la estenosis alcanza el umbral clínico (70% por defecto)."""
        return self.ds_percent >= threshold


def radius_profile(m: BinaryMask) -> RadiusProfile:
    if m.is_empty():
        raise EmptyMaskError("la máscara no tiene primer plano")
    path = longest_path(skeletonize(m))
    rows, cols = path.as_arrays()
    radii = distance_transform(m).values[rows, cols]
    return RadiusProfile(radii=radii, path=path)


def detect_peaks(
    p: RadiusProfile | np.ndarray,
    min_prominence: float = MIN_PROMINENCE,
    min_separation: int = MIN_SEPARATION,
) -> list[int]:
    """
    Máximos locales estrictos del perfil (mesetas colapsadas a su centro) con
    prominencia >= min_prominence y separación mutua >= min_separation.

    Con picos demasiado cercanos gana el más alto (empate: el de menor índice).
    Los extremos del perfil nunca son picos.

    Returns:
        Índices en orden ascendente.
    """
    radii = np.asarray(p.radii if isinstance(p, RadiusProfile) else p, dtype=float)
    if radii.shape[0] < 3:
        return []

    candidates, _ = find_peaks(radii, prominence=min_prominence)
    order = sorted(candidates.tolist(), key=lambda i: (-radii[i], i))
    kept: list[int] = []
    for idx in order:
        if all(abs(idx - k) >= min_separation for k in kept):
            kept.append(idx)
    return sorted(kept)


def _narrowest_index(radii: np.ndarray, lo: int, hi: int) -> int:
    """
    Índice del radio mínimo en radii[lo:hi]. Con varios mínimos empatados se
    toma el empatado más cercano al centro del tramo que ocupan (empate: el
    de menor índice), así el punto no depende del sentido del camino.
    """
    window = radii[lo:hi]
    tied = np.flatnonzero(window == window.min())
    if tied.size == 1:
        return lo + int(tied[0])
    centre = (tied[0] + tied[-1]) / 2.0
    return lo + int(tied[np.argmin(np.abs(tied - centre))])


def _report(radii: np.ndarray, path: SkeletonPath, mld_idx: int, mad: float, peaks: list[int]) -> SeverityReport:
    mld = 2.0 * float(radii[mld_idx])
    x, y = path.points[mld_idx]
    return SeverityReport(
        mld_px=mld,
        mad_px=mad,
        ds_percent=(1.0 - mld / mad) * 100.0,
        mld_point=Point(x=x, y=y),
        peak_indices=peaks,
    )


def estimate_severity(
    m: BinaryMask,
    min_prominence: float = MIN_PROMINENCE,
    min_separation: int = MIN_SEPARATION,
    trim_fraction: float = TRIM_FRACTION,
) -> SeverityReport:
    """
    MLD, MAD y DS de una máscara de lesión.

    Con dos o más picos, el MLD es el doble del radio mínimo estrictamente
    entre el primer y el último pico, y el MAD el doble del pico más alto.
    Con menos de dos picos se descarta un 5% de muestras en cada extremo y se
    usan el mínimo y el máximo globales. Con un tramo de mínimos empatados el
    MLD se ubica en su centro.

    Raises:
        EmptyMaskError: máscara vacía.
        DegenerateMaskError: camino central de menos de 3 píxeles.
    """
    profile = radius_profile(m)
    n = len(profile)
    if n < 3:
        raise DegenerateMaskError(f"camino central de {n} px; se requieren al menos 3")

    radii = profile.radii
    peaks = detect_peaks(profile, min_prominence, min_separation)
    if len(peaks) >= 2:
        first, last = peaks[0], peaks[-1]
        mld_idx = _narrowest_index(radii, first + 1, last)
        mad = 2.0 * float(radii[peaks].max())
    else:
        k = int(math.floor(n * trim_fraction))
        trimmed = radii[k : n - k]
        mld_idx = _narrowest_index(radii, k, n - k)
        mad = 2.0 * float(trimmed.max())
        logger.debug("%d pico(s) en %d muestras: se usa el perfil recortado (k=%d)", len(peaks), n, k)

    return _report(radii, profile.path, mld_idx, mad, peaks)


def severity_from_crop(img_mask: BinaryMask, ctx: CropContext, **kwargs) -> SeverityReport:
    """Severidad sobre el recorte; solo mld_point vuelve a coordenadas de la imagen."""
    report = estimate_severity(img_mask, **kwargs)
    return report.model_copy(update={"mld_point": uncrop_point(report.mld_point, ctx)})
