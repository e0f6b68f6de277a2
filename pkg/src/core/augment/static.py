"""
Nivel estático: expande cada imagen 8x (original + 7 transformaciones
fotométricas). Las anotaciones y la máscara no cambian.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence

import cv2
import numpy as np

from src.core.augment.config import (
    AugmentConfig,
    ClaheParams,
    DefocusParams,
    MedianParams,
    MotionParams,
    NoiseParams,
    ShuffleParams,
)
from src.core.augment.sample import AugmentedSample, Provenance
from src.core.augment.seeding import derive_seed, rng_for
from src.core.types import BinaryMask, GrayImage, LesionAnnotation

logger = logging.getLogger(__name__)

STATIC_TRANSFORMS = ("clahe", "invert", "noise", "median", "motion", "defocus", "shuffle")


def clahe(pixels: np.ndarray, params: ClaheParams) -> np.ndarray:
    grid = (params.tile_grid, params.tile_grid)
    return cv2.createCLAHE(clipLimit=params.clip_limit, tileGridSize=grid).apply(pixels)


def invert(pixels: np.ndarray) -> np.ndarray:
    return 255 - pixels


def multiplicative_noise(pixels: np.ndarray, params: NoiseParams, rng: np.random.Generator) -> np.ndarray:
    """Ruido tipo speckle: cada píxel se multiplica por un factor uniforme en [low, high]."""
    factors = rng.uniform(params.low, params.high, size=pixels.shape)
    return np.clip(np.rint(pixels * factors), 0, 255).astype(np.uint8)


def median_blur(pixels: np.ndarray, params: MedianParams) -> np.ndarray:
    return cv2.medianBlur(pixels, params.kernel)


def motion_kernel(size: int, angle_deg: float) -> np.ndarray:
    """Línea de largo `size` que pasa por el centro con el ángulo dado, normalizada."""
    kernel = np.zeros((size, size), dtype=np.float32)
    c = size // 2
    dx, dy = math.cos(math.radians(angle_deg)) * c, math.sin(math.radians(angle_deg)) * c
    p1 = (int(round(c - dx)), int(round(c - dy)))
    p2 = (int(round(c + dx)), int(round(c + dy)))
    cv2.line(kernel, p1, p2, 1.0, thickness=1)
    return kernel / kernel.sum()


def motion_blur(pixels: np.ndarray, params: MotionParams, rng: np.random.Generator) -> np.ndarray:
    angle = float(rng.uniform(0.0, 180.0))
    return cv2.filter2D(pixels, -1, motion_kernel(params.kernel, angle), borderType=cv2.BORDER_REFLECT_101)


def disc_kernel(radius: int) -> np.ndarray:
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    kernel = (xx**2 + yy**2 <= radius**2).astype(np.float32)
    return kernel / kernel.sum()


def defocus_blur(pixels: np.ndarray, params: DefocusParams) -> np.ndarray:
    return cv2.filter2D(pixels, -1, disc_kernel(params.radius), borderType=cv2.BORDER_REFLECT_101)


def shuffle_windows(shape: tuple[int, int], params: ShuffleParams, rng: np.random.Generator) -> list[tuple[int, int, int]]:
    """Ventanas (fila, columna, lado) a barajar, en el orden en que se aplican."""
    height, width = shape
    windows = []
    for _ in range(params.windows):
        side = min(int(rng.integers(params.min_side, params.max_side + 1)), height, width)
        y = int(rng.integers(0, height - side + 1))
        x = int(rng.integers(0, width - side + 1))
        windows.append((y, x, side))
    return windows


def local_pixel_shuffle(pixels: np.ndarray, params: ShuffleParams, rng: np.random.Generator) -> np.ndarray:
    """Permuta los píxeles dentro de ventanas pequeñas; el histograma no cambia."""
    out = pixels.copy()
    for y, x, side in shuffle_windows(pixels.shape, params, rng):
        block = out[y : y + side, x : x + side]
        out[y : y + side, x : x + side] = rng.permutation(block.ravel()).reshape(block.shape)
    return out


def apply_static(name: str, pixels: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    s = cfg.static
    if name == "clahe":
        return clahe(pixels, s.clahe)
    if name == "invert":
        return invert(pixels)
    if name == "noise":
        return multiplicative_noise(pixels, s.noise, rng)
    if name == "median":
        return median_blur(pixels, s.median)
    if name == "motion":
        return motion_blur(pixels, s.motion, rng)
    if name == "defocus":
        return defocus_blur(pixels, s.defocus)
    if name == "shuffle":
        return local_pixel_shuffle(pixels, s.shuffle, rng)
    raise ValueError(f"transformación estática desconocida: {name}")


def static_expand(
    img: GrayImage,
    anns: Sequence[LesionAnnotation],
    cfg: AugmentConfig,
    seed: int,
    source_id: str = "image",
    mask: BinaryMask | None = None,
) -> list[AugmentedSample]:
    """
    Devuelve 8 muestras: la original y una por transformación estática.

    Cada transformación usa su propio flujo aleatorio derivado de `seed`.
    """
    base = Provenance(source_id=source_id)
    samples = [AugmentedSample(img, tuple(anns), base.extend("static", "static-original", seed), mask)]
    for name in STATIC_TRANSFORMS:
        sub_seed = derive_seed(seed, "static", name)
        pixels = apply_static(name, img.pixels, cfg, rng_for(sub_seed))
        prov = base.extend("static", f"static-{name}", sub_seed)
        samples.append(AugmentedSample(GrayImage(pixels), tuple(anns), prov, mask))
    logger.debug("%s: expansión estática a %d muestras", source_id, len(samples))
    return samples
