"""
Fantomas sintéticos de lesiones con MLD y MAD conocidos por construcción.

Convención de radios (EDT con marco de fondo): una banda con filas
c-h+1 .. c+h-1 tiene radio h en la fila central; un disco
(x-cx)^2 + (y-cy)^2 < R^2 tiene radio R en su centro.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from src.core.types import BinaryMask

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PhantomCase:
    kind: str
    mask: BinaryMask
    mld_px: float
    mad_px: float

    @property
    def ds_percent(self) -> float:
        return (1.0 - self.mld_px / self.mad_px) * 100.0


def _band(canvas: np.ndarray, center_row: int, half_width: int, x_start: int, x_stop: int) -> None:
    if half_width < 1 or x_stop <= x_start:
        return
    canvas[center_row - half_width + 1 : center_row + half_width, x_start:x_stop] = True


def dumbbell(
    bulb_radius: int = 12,
    neck_half_width: int = 3,
    neck_length: int = 60,
    stub_half_width: int | None = None,
    stub_length: int = 12,
    margin: int = 6,
) -> BinaryMask:
    """
    Dos discos unidos por un cuello horizontal, con un tramo de vaso a cada lado.

    MLD analítico = 2 * neck_half_width; MAD analítico = 2 * bulb_radius.
    `neck_length` es la distancia entre los bordes de los discos.
    """
    if not 1 <= neck_half_width < bulb_radius:
        raise ValueError("se requiere 1 <= neck_half_width < bulb_radius")
    stub = neck_half_width if stub_half_width is None else stub_half_width
    r = bulb_radius
    height = 2 * margin + 2 * r + 1
    cy = margin + r
    cx1 = margin + stub_length + r
    cx2 = cx1 + 2 * r + neck_length
    width = cx2 + r + stub_length + margin + 1

    yy, xx = np.mgrid[0:height, 0:width]
    canvas = ((xx - cx1) ** 2 + (yy - cy) ** 2 < r * r) | ((xx - cx2) ** 2 + (yy - cy) ** 2 < r * r)
    _band(canvas, cy, neck_half_width, cx1, cx2 + 1)
    _band(canvas, cy, stub, margin, cx1 + 1)
    _band(canvas, cy, stub, cx2, width - margin)
    return BinaryMask(canvas)


def taper(
    healthy_half_width: int = 8,
    narrow_half_width: int = 3,
    healthy_length: int = 30,
    taper_length: int = 20,
    neck_length: int = 10,
    right_half_width: int | None = None,
    margin: int = 6,
) -> BinaryMask:
    """
    Banda cuyo semiancho baja linealmente de sano a estrecho y vuelve a subir.

    MLD analítico = 2 * narrow_half_width; MAD analítico = 2 * max(semiancho sano).
    """
    right = healthy_half_width if right_half_width is None else right_half_width
    if not 1 <= narrow_half_width < min(healthy_half_width, right):
        raise ValueError("el cuello debe ser más estrecho que ambos segmentos sanos")

    widths = np.concatenate(
        [
            np.full(healthy_length, healthy_half_width, dtype=float),
            np.linspace(healthy_half_width, narrow_half_width, taper_length + 2)[1:-1],
            np.full(neck_length, narrow_half_width, dtype=float),
            np.linspace(narrow_half_width, right, taper_length + 2)[1:-1],
            np.full(healthy_length, right, dtype=float),
        ]
    )
    widths = np.rint(widths).astype(int)
    top = max(healthy_half_width, right)
    height = 2 * margin + 2 * top - 1
    center = margin + top - 1
    canvas = np.zeros((height, 2 * margin + widths.shape[0]), dtype=bool)
    for offset, hw in enumerate(widths):
        _band(canvas, center, int(hw), margin + offset, margin + offset + 1)
    return BinaryMask(canvas)


def embed(mask: BinaryMask, width: int, height: int, x: int, y: int) -> BinaryMask:
    """Coloca la máscara en un lienzo mayor con su esquina en (x, y)."""
    if x < 0 or y < 0 or x + mask.width > width or y + mask.height > height:
        raise ValueError(f"la máscara {mask.width}x{mask.height} no entra en {width}x{height} en ({x}, {y})")
    canvas = np.zeros((height, width), dtype=bool)
    canvas[y : y + mask.height, x : x + mask.width] = mask.data
    return BinaryMask(canvas)


def random_phantom_suite(n: int = 20, seed: int = 0, size: int = 512) -> list[PhantomCase]:
    """Alterna mancuernas y estrechamientos graduales con parámetros aleatorios reproducibles."""
    rng = np.random.default_rng(seed)
    cases = []
    for i in range(n):
        if i % 2 == 0:
            r = int(rng.integers(14, 25))
            h = int(rng.integers(2, 5))
            mask = dumbbell(bulb_radius=r, neck_half_width=h, neck_length=int(rng.integers(40, 121)))
            kind, mld, mad = "dumbbell", 2.0 * h, 2.0 * r
        else:
            hw = int(rng.integers(8, 17))
            hn = int(rng.integers(2, hw - 3))
            mask = taper(
                healthy_half_width=hw,
                narrow_half_width=hn,
                healthy_length=int(rng.integers(2 * hw + 4, 2 * hw + 40)),
                taper_length=int(rng.integers(10, 41)),
                neck_length=int(rng.integers(4, 31)),
            )
            kind, mld, mad = "taper", 2.0 * hn, 2.0 * hw

        x = int(rng.integers(0, size - mask.width + 1))
        y = int(rng.integers(0, size - mask.height + 1))
        cases.append(PhantomCase(kind=kind, mask=embed(mask, size, size, x, y), mld_px=mld, mad_px=mad))
    logger.debug("suite de %d fantomas generada (semilla %d)", n, seed)
    return cases
