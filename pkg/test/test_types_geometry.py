import numpy as np
import pytest
from pydantic import ValidationError

from src.core.errors import DegenerateCropError
from src.core.geometry import bbox_contains, bbox_iou, crop_resize, iou_matrix, uncrop_point
from src.core.types import (
    BinaryMask,
    BoundingBox,
    CropContext,
    DatasetManifest,
    GrayImage,
    LesionAnnotation,
    Point,
)


def _box(*coords):
    return BoundingBox.model_validate(list(coords))


def test_iou_examples():
    assert bbox_iou(_box(0, 0, 10, 10), _box(0, 0, 10, 10)) == 1.0
    assert bbox_iou(_box(0, 0, 1, 1), _box(2, 2, 3, 3)) == 0.0
    assert bbox_iou(_box(0, 0, 10, 10), _box(5, 0, 15, 10)) == pytest.approx(1 / 3)


def test_iou_symmetric_and_bounded(rng):
    for _ in range(200):
        a = np.sort(rng.uniform(0, 50, size=(2, 2)), axis=0)
        b = np.sort(rng.uniform(0, 50, size=(2, 2)), axis=0)
        ba = _box(a[0, 0], a[0, 1], a[1, 0] + 0.1, a[1, 1] + 0.1)
        bb = _box(b[0, 0], b[0, 1], b[1, 0] + 0.1, b[1, 1] + 0.1)
        v = bbox_iou(ba, bb)
        assert 0.0 <= v <= 1.0
        assert v == pytest.approx(bbox_iou(bb, ba), abs=1e-12)
        assert iou_matrix(ba.as_array(), bb.as_array())[0, 0] == pytest.approx(v, abs=1e-12)


def test_contains_is_closed():
    b = _box(0, 0, 10, 10)
    assert bbox_contains(b, Point(x=5, y=5))
    assert bbox_contains(b, Point(x=10, y=10))
    assert not bbox_contains(b, Point(x=11, y=5))


@pytest.mark.parametrize("coords", [[5, 0, 5, 10], [0, 0, 3, -1], [-1, 0, 3, 3], [0, 0, float("inf"), 3]])
def test_invalid_boxes_rejected(coords):
    with pytest.raises(ValidationError):
        BoundingBox.model_validate(coords)


def test_json_shapes_are_lists():
    ann = LesionAnnotation(bbox=[1, 2, 5, 6], mld_point=[3, 4], mld_px=2.5)
    assert ann.model_dump() == {"bbox": [1.0, 2.0, 5.0, 6.0], "mld_point": [3.0, 4.0], "mld_px": 2.5}


def test_annotation_mld_must_be_inside_box():
    with pytest.raises(ValidationError):
        LesionAnnotation(bbox=[0, 0, 5, 5], mld_point=[6, 1])
    with pytest.raises(ValidationError):
        LesionAnnotation(bbox=[0, 0, 5, 5], mld_px=0)


def test_manifest_invariants():
    image = {"id": "a", "path": "a.png", "width": 10, "height": 10, "lesions": [{"bbox": [0, 0, 4, 4]}]}
    assert DatasetManifest.model_validate({"images": [image]}).by_id()["a"].width == 10
    with pytest.raises(ValidationError):
        DatasetManifest.model_validate({"images": [image, image]})
    with pytest.raises(ValidationError):
        DatasetManifest.model_validate({"images": [{**image, "lesions": [{"bbox": [0, 0, 11, 4]}]}]})


def test_raster_types():
    with pytest.raises(ValueError):
        GrayImage(np.zeros((4, 4, 3), dtype=np.uint8))
    gray = GrayImage(np.array([[0, 127], [128, 255]], dtype=np.uint8))
    mask = BinaryMask.from_gray(gray)
    assert mask.data.tolist() == [[False, False], [True, True]]
    assert mask.to_gray() == GrayImage(np.array([[0, 0], [255, 255]], dtype=np.uint8))


def test_crop_full_image_is_identity(rng):
    img = GrayImage(rng.integers(0, 256, size=(20, 30), dtype=np.uint8))
    crop, ctx = crop_resize(img, _box(0, 0, 30, 20), 30, 20)
    assert crop == img
    assert ctx == CropContext()


def test_crop_of_constant_is_constant():
    img = GrayImage(np.full((4, 4), 77, dtype=np.uint8))
    crop, _ = crop_resize(img, _box(0, 0, 4, 4), 8, 8)
    assert crop.pixels.shape == (8, 8)
    assert np.all(crop.pixels == 77)


def test_crop_round_trip_within_half_pixel(rng):
    img = GrayImage(rng.integers(0, 256, size=(64, 64), dtype=np.uint8))
    _, ctx = crop_resize(img, _box(10, 12, 26, 36), 32, 48)
    for _ in range(50):
        p = Point(x=rng.uniform(10, 26), y=rng.uniform(12, 36))
        back = uncrop_point(ctx.forward(p), ctx)
        assert abs(back.x - p.x) <= 0.5 and abs(back.y - p.y) <= 0.5


def test_crop_outside_image_is_degenerate():
    img = GrayImage(np.zeros((20, 20), dtype=np.uint8))
    with pytest.raises(DegenerateCropError):
        crop_resize(img, _box(50, 50, 60, 60), 8, 8)


def test_uncrop_examples():
    assert uncrop_point(Point(x=3, y=4), CropContext()) == Point(x=3, y=4)
    assert uncrop_point(Point(x=3, y=4), CropContext(offset_x=10, offset_y=20)) == Point(x=13, y=24)
    assert uncrop_point(Point(x=4, y=4), CropContext(scale_x=0.5, scale_y=0.5)) == Point(x=8, y=8)
