import numpy as np
import pytest
from scipy import ndimage

from src.core.types import (
    BinaryMask,
    BoundingBox,
    DatasetManifest,
    Detection,
    GrayImage,
    ImageRecord,
    LesionAnnotation,
    Point,
)
from src.infrastructure.io import write_png
from src.infrastructure.serialization import write_json


@pytest.fixture
def rng():
    return np.random.default_rng(20240613)


@pytest.fixture
def make_blobs():
    """Máscaras aleatorias con manchas suaves (ruido filtrado y umbralizado)."""

    def build(rng: np.random.Generator, size: int = 32, sigma: float = 1.5) -> BinaryMask:
        field = ndimage.gaussian_filter(rng.random((size, size)), sigma=sigma)
        return BinaryMask(field > np.median(field))

    return build


@pytest.fixture
def make_tree():
    """Esqueletos con forma de árbol: cada píxel nuevo toca exactamente un píxel previo."""

    def build(rng: np.random.Generator, n_pixels: int = 120, size: int = 40) -> BinaryMask:
        grid = np.zeros((size, size), dtype=bool)
        grid[size // 2, size // 2] = True
        offsets = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
        for _ in range(20 * n_pixels):
            if grid.sum() >= n_pixels:
                break
            ys, xs = np.nonzero(grid)
            k = int(rng.integers(len(ys)))
            dy, dx = offsets[int(rng.integers(8))]
            y, x = ys[k] + dy, xs[k] + dx
            if not (1 <= y < size - 1 and 1 <= x < size - 1) or grid[y, x]:
                continue
            if grid[y - 1 : y + 2, x - 1 : x + 2].sum() == 1:
                grid[y, x] = True
        return BinaryMask(grid)

    return build


def box(x1, y1, x2, y2) -> BoundingBox:
    return BoundingBox(x_min=x1, y_min=y1, x_max=x2, y_max=y2)


@pytest.fixture
def make_det():
    def build(x1, y1, x2, y2, conf=0.9, image_id="img", mld_px=None) -> Detection:
        return Detection(image_id=image_id, bbox=box(x1, y1, x2, y2), confidence=conf, mld_px=mld_px)

    return build


@pytest.fixture
def make_gt():
    def build(x1, y1, x2, y2, mld=None, mld_px=None) -> LesionAnnotation:
        point = Point(x=mld[0], y=mld[1]) if mld is not None else None
        return LesionAnnotation(bbox=box(x1, y1, x2, y2), mld_point=point, mld_px=mld_px)

    return build


@pytest.fixture
def write_dataset():
    """Escribe n imágenes PNG con una lesión cada una y su manifiesto; devuelve la ruta del manifiesto."""

    def build(root, n_images=2, size=48, seed=0):
        rng = np.random.default_rng(seed)
        records = []
        for k in range(n_images):
            image_id = f"case{k:02d}"
            pixels = rng.integers(0, 256, size=(size, size), dtype=np.uint8)
            write_png(root / "images" / f"{image_id}.png", GrayImage(pixels))
            lesion = LesionAnnotation(bbox=[8, 10, 30, 28], mld_point=[19, 19], mld_px=3.0)
            records.append(
                ImageRecord(id=image_id, path=f"images/{image_id}.png", width=size, height=size, lesions=[lesion])
            )
        return write_json(root / "manifest.json", DatasetManifest(images=records))

    return build
