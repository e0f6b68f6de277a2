"""Nivel compuesto: mosaico 2x2 estilo YOLO alrededor de un centro con jitter."""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import replace

import cv2
import numpy as np

from src.core.augment.config import AugmentConfig
from src.core.augment.dynamic import remap_annotations
from src.core.augment.sample import AugmentedSample
from src.core.errors import InsufficientSamplesError
from src.core.types import GrayImage

logger = logging.getLogger(__name__)

MOSAIC_SIZE = 4


def mosaic_center(cfg: AugmentConfig, rng: np.random.Generator) -> tuple[int, int]:
    """Centro del lienzo 2W x 2H, desplazado dentro de la fracción central configurada."""
    c = cfg.composite
    half = c.jitter_fraction / 2.0
    xc = int(round(2 * c.canvas_width * (0.5 + rng.uniform(-half, half))))
    yc = int(round(2 * c.canvas_height * (0.5 + rng.uniform(-half, half))))
    return xc, yc


def mosaic(
    samples: Sequence[AugmentedSample],
    cfg: AugmentConfig,
    rng: np.random.Generator,
    tag: str = "mosaic",
    seed: int = 0,
) -> AugmentedSample:
    """
    Compone 4 muestras en cuadrantes TL, TR, BL, BR alrededor del centro.

    Cada muestra se lleva al tamaño objetivo; el lienzo de 2W x 2H se reduce
    al final al tamaño objetivo. Las cajas se recortan al lienzo, se filtran
    por área y lado mínimo, y se escalan por 1/2. La muestra resultante no
    lleva máscara.
    """
    if len(samples) != MOSAIC_SIZE:
        raise InsufficientSamplesError(f"el mosaico requiere {MOSAIC_SIZE} muestras, recibidas {len(samples)}")
    if len({s.name for s in samples}) != MOSAIC_SIZE:
        raise InsufficientSamplesError(f"el mosaico requiere {MOSAIC_SIZE} muestras distintas: {[s.name for s in samples]}")

    c = cfg.composite
    tw, th = c.canvas_width, c.canvas_height
    xc, yc = mosaic_center(cfg, rng)
    canvas = np.zeros((2 * th, 2 * tw), dtype=np.uint8)
    offsets = ((xc - tw, yc - th), (xc, yc - th), (xc - tw, yc), (xc, yc))

    anns = []
    for sample, (ox, oy) in zip(samples, offsets):
        pixels = sample.image.pixels
        sx, sy = tw / sample.image.width, th / sample.image.height
        if pixels.shape != (th, tw):
            pixels = cv2.resize(pixels, (tw, th), interpolation=cv2.INTER_LINEAR)

        # Intersección del cuadrante con el lienzo
        x0, y0 = max(ox, 0), max(oy, 0)
        x1, y1 = min(ox + tw, 2 * tw), min(oy + th, 2 * th)
        if x1 > x0 and y1 > y0:
            canvas[y0:y1, x0:x1] = pixels[y0 - oy : y1 - oy, x0 - ox : x1 - ox]

        matrix = np.array([[sx, 0.0, float(ox)], [0.0, sy, float(oy)]])
        anns.extend(remap_annotations(sample.annotations, matrix, 2 * tw, 2 * th, c.min_area_fraction))

    half = np.array([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0]])
    anns = remap_annotations(anns, half, tw, th, min_area_fraction=0.0, min_side=c.min_side)
    out = cv2.resize(canvas, (tw, th), interpolation=cv2.INTER_AREA)

    primary = samples[0]
    prov = replace(primary.provenance, partners=tuple(s.name for s in samples[1:]))
    prov = prov.extend("composite", tag, seed)
    logger.debug("mosaico %s: centro=(%d, %d), %d cajas", primary.name, xc, yc, len(anns))
    return AugmentedSample(GrayImage(out), anns, prov)
