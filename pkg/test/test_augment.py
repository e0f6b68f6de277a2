from collections import Counter

import numpy as np
import pytest
from pydantic import ValidationError

from src.core.augment import (
    AugmentConfig,
    AugmentedSample,
    Provenance,
    apply_dynamic,
    build_training_stream,
    mosaic,
    static_expand,
)
from src.core.augment.config import DynamicConfig, MedianParams, NoiseParams, ShuffleParams
from src.core.augment.dynamic import affine_box, erase, hflip, remap_annotations, translate
from src.core.augment.seeding import derive_seed, rng_for
from src.core.augment.static import (
    STATIC_TRANSFORMS,
    apply_static,
    invert,
    local_pixel_shuffle,
    multiplicative_noise,
    shuffle_windows,
)
from src.core.errors import InsufficientSamplesError, InvalidTierError
from src.core.types import GrayImage, LesionAnnotation
from src.infrastructure.io import RecordImageLoader, load_manifest

NO_DYNAMIC = DynamicConfig(scale_p=0, erase_p=0, translate_p=0, jiggle_p=0, flip_p=0)


def _sample(rng, size=64, anns=None, source_id="s"):
    pixels = rng.integers(0, 256, size=(size, size), dtype=np.uint8)
    if anns is None:
        anns = (LesionAnnotation(bbox=[10, 12, 30, 40], mld_point=[20, 20], mld_px=4.0),)
    return AugmentedSample(GrayImage(pixels), anns, Provenance(source_id=source_id))


# --- seeding ---


def test_derive_seed_is_stable_and_key_sensitive():
    assert derive_seed(7, "a", "static") == derive_seed(7, "a", "static")
    assert derive_seed(7, "a", "static") != derive_seed(7, "b", "static")
    assert derive_seed(7, "a") != derive_seed(8, "a")
    assert rng_for(3, "x").random() == rng_for(3, "x").random()


# --- nivel estático ---


def test_static_expand_gives_eight_samples(rng):
    img = GrayImage(rng.integers(0, 256, size=(40, 40), dtype=np.uint8))
    anns = (LesionAnnotation(bbox=[1, 2, 10, 12]),)
    samples = static_expand(img, anns, AugmentConfig(), seed=11, source_id="img")
    assert len(samples) == 1 + len(STATIC_TRANSFORMS) == 8
    assert all(s.annotations == anns for s in samples)
    assert samples[0].image == img
    assert [s.name for s in samples] == ["img__static-original"] + [f"img__static-{t}" for t in STATIC_TRANSFORMS]


def test_static_expand_is_deterministic(rng):
    img = GrayImage(rng.integers(0, 256, size=(32, 32), dtype=np.uint8))
    a = static_expand(img, (), AugmentConfig(), seed=3)
    b = static_expand(img, (), AugmentConfig(), seed=3)
    assert all(x.image == y.image for x, y in zip(a, b))


def test_invert_is_an_involution(rng):
    for _ in range(20):
        pixels = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
        assert np.array_equal(invert(pixels), 255 - pixels)
        assert np.array_equal(invert(invert(pixels)), pixels)


def test_smoothing_transforms_keep_constant_images():
    pixels = np.full((32, 32), 100, dtype=np.uint8)
    cfg = AugmentConfig()
    for name in ("clahe", "median", "motion", "defocus", "shuffle"):
        out = apply_static(name, pixels, cfg, np.random.default_rng(0))
        assert np.unique(out).size == 1, name


def test_noise_stays_within_factor_bounds(rng):
    pixels = rng.integers(0, 256, size=(32, 32), dtype=np.uint8)
    out = multiplicative_noise(pixels, NoiseParams(low=0.9, high=1.1), rng).astype(int)
    low = np.floor(pixels * 0.9) - 1
    high = np.minimum(np.ceil(pixels * 1.1) + 1, 255)
    assert np.all((out >= low) & (out <= high))


def test_shuffle_preserves_each_window(rng):
    params = ShuffleParams(windows=1, min_side=4, max_side=16)
    for k in range(50):
        pixels = rng.integers(0, 256, size=(32, 32), dtype=np.uint8)
        (y, x, side), = shuffle_windows(pixels.shape, params, np.random.default_rng(k))
        out = local_pixel_shuffle(pixels, params, np.random.default_rng(k))
        inside = (slice(y, y + side), slice(x, x + side))
        assert sorted(out[inside].ravel()) == sorted(pixels[inside].ravel())
        outside = np.ones_like(pixels, dtype=bool)
        outside[inside] = False
        assert np.array_equal(out[outside], pixels[outside])


def test_shuffle_keeps_the_histogram(rng):
    pixels = rng.integers(0, 256, size=(64, 64), dtype=np.uint8)
    out = local_pixel_shuffle(pixels, ShuffleParams(), rng)
    assert Counter(out.ravel().tolist()) == Counter(pixels.ravel().tolist())


def test_config_validation():
    with pytest.raises(ValidationError):
        MedianParams(kernel=4)
    with pytest.raises(ValidationError):
        DynamicConfig(flip_p=1.5)
    with pytest.raises(ValidationError):
        NoiseParams(low=1.2, high=1.0)


# --- nivel dinámico ---


def test_dynamic_with_zero_probabilities_is_identity(rng):
    sample = _sample(rng)
    cfg = AugmentConfig(dynamic=NO_DYNAMIC)
    out = apply_dynamic(sample, cfg, rng, tag="dynamic-e0", seed=5)
    assert out.image == sample.image
    assert out.annotations == sample.annotations
    assert out.provenance.tags == ("dynamic-e0",)
    assert out.provenance.ops == ()


def test_flip_is_an_involution(rng):
    sample = _sample(rng)
    cfg = AugmentConfig(dynamic=NO_DYNAMIC.model_copy(update={"flip_p": 1.0}))
    once = apply_dynamic(sample, cfg, rng)
    assert once.annotations[0].bbox.as_array().tolist() == [34.0, 12.0, 54.0, 40.0]
    assert once.annotations[0].mld_point.x == 43.0
    assert once.image.pixels[20, 43] == sample.image.pixels[20, 20]
    twice = hflip(once)
    assert twice.image == sample.image
    assert twice.annotations == sample.annotations


def test_translation_moves_boxes(rng):
    sample = _sample(rng)
    moved = translate(sample, 10, 5)
    assert moved.annotations[0].bbox.as_array().tolist() == [20.0, 17.0, 40.0, 45.0]
    assert moved.annotations[0].mld_point.x == 30.0
    assert np.array_equal(moved.image.pixels[5:, 10:], sample.image.pixels[:-5, :-10])


def test_boxes_pushed_off_the_canvas_are_dropped(rng):
    sample = _sample(rng)
    assert translate(sample, 60, 0).annotations == ()


def test_affine_box_round_trip(rng):
    for _ in range(50):
        s, tx, ty = rng.uniform(0.5, 2.0), rng.uniform(-20, 20), rng.uniform(-20, 20)
        forward = np.array([[s, 0, tx], [0, s, ty]])
        inverse = np.array([[1 / s, 0, -tx / s], [0, 1 / s, -ty / s]])
        coords = np.array([3.0, 4.0, 20.0, 30.0])
        np.testing.assert_allclose(affine_box(affine_box(coords, forward), inverse), coords, atol=1e-9)


def test_remap_scales_mld_and_drops_lost_points():
    ann = LesionAnnotation(bbox=[10, 10, 20, 20], mld_point=[19, 15], mld_px=4.0)
    (scaled,) = remap_annotations([ann], np.array([[2.0, 0, 0], [0, 2.0, 0]]), 100, 100)
    assert scaled.mld_px == 8.0
    assert scaled.bbox.as_array().tolist() == [20.0, 20.0, 40.0, 40.0]
    (clipped,) = remap_annotations([ann], np.array([[1.0, 0, -12.0], [0, 1.0, 0]]), 5, 100, min_area_fraction=0.0)
    assert clipped.mld_point is None


def test_erase_fills_with_mean(rng):
    sample = _sample(rng)
    out = erase(sample, 2, 3, 5, 6)
    assert np.all(out.image.pixels[2:7, 3:9] == int(round(float(sample.image.pixels.mean()))))
    assert out.annotations == sample.annotations


def test_dynamic_is_reproducible(rng):
    sample = _sample(rng)
    cfg = AugmentConfig()
    a = apply_dynamic(sample, cfg, rng_for(1, "k"))
    b = apply_dynamic(sample, cfg, rng_for(1, "k"))
    assert a.image == b.image
    assert a.annotations == b.annotations
    assert a.provenance == b.provenance


# --- nivel compuesto ---


def _composite_cfg(jitter=0.0, size=64):
    return AugmentConfig.model_validate(
        {"composite": {"jitter_fraction": jitter, "canvas_width": size, "canvas_height": size}}
    )


def test_mosaic_of_identical_images(rng):
    base = _sample(rng, size=64)
    samples = [AugmentedSample(base.image, base.annotations, Provenance(source_id=f"s{k}")) for k in range(4)]
    out = mosaic(samples, _composite_cfg(), rng)
    assert out.image.pixels.shape == (64, 64)
    q = out.image.pixels
    assert np.array_equal(q[:32, :32], q[:32, 32:])
    assert np.array_equal(q[:32, :32], q[32:, :32])
    assert np.array_equal(q[:32, :32], q[32:, 32:])
    assert len(out.annotations) == 4
    assert out.provenance.partners == ("s1", "s2", "s3")
    assert out.provenance.tiers == ("composite",)


def test_mosaic_boxes_stay_inside(rng):
    for k in range(20):
        samples = [_sample(rng, size=int(rng.integers(40, 90)), source_id=f"s{i}") for i in range(4)]
        samples = [
            AugmentedSample(
                s.image,
                (LesionAnnotation(bbox=[5, 5, s.image.width - 5, s.image.height - 5], mld_px=3.0),),
                s.provenance,
            )
            for s in samples
        ]
        out = mosaic(samples, _composite_cfg(jitter=0.5), rng_for(k))
        assert len(out.annotations) <= 4
        for ann in out.annotations:
            assert ann.bbox.x_max <= 64 and ann.bbox.y_max <= 64


def test_mosaic_requires_four_samples(rng):
    with pytest.raises(InsufficientSamplesError):
        mosaic([_sample(rng) for _ in range(3)], _composite_cfg(), rng)


def test_mosaic_rejects_repeated_samples(rng):
    base = _sample(rng)
    with pytest.raises(InsufficientSamplesError):
        mosaic([base, base, _sample(rng, source_id="b"), _sample(rng, source_id="c")], _composite_cfg(), rng)


# --- flujo de entrenamiento ---


def _stream(manifest_path, tiers, **kwargs):
    manifest = load_manifest(manifest_path)
    loader = RecordImageLoader(manifest_path.parent)
    return build_training_stream(manifest, AugmentConfig(master_seed=9), tiers, loader, **kwargs)


def test_static_stream_expands_eightfold(tmp_path, write_dataset):
    stream = _stream(write_dataset(tmp_path, n_images=3), ["static"])
    assert len(stream) == 24
    assert [s.provenance.source_id for s in stream[:8]] == ["case00"] * 8


def test_stream_is_reproducible_and_worker_independent(tmp_path, write_dataset):
    path = write_dataset(tmp_path, n_images=3)
    tiers = ["static", "dynamic", "composite"]
    serial = _stream(path, tiers)
    again = _stream(path, tiers)
    pooled = _stream(path, tiers, n_jobs=2)
    for a, b, c in zip(serial, again, pooled):
        assert a.name == b.name == c.name
        assert a.image == b.image == c.image
        assert a.annotations == b.annotations == c.annotations
    assert all(s.provenance.tiers == ("static", "dynamic", "composite") for s in serial)
    assert len(serial) == 24


def test_final_epochs_skip_composite(tmp_path, write_dataset):
    stream = _stream(write_dataset(tmp_path), ["static", "dynamic", "composite"], final_epochs=True)
    assert all("composite" not in s.provenance.tiers for s in stream)


def test_epochs_draw_different_augmentations(tmp_path, write_dataset):
    path = write_dataset(tmp_path, n_images=1)
    e0 = _stream(path, ["static", "dynamic"], epoch=0)
    e1 = _stream(path, ["static", "dynamic"], epoch=1)
    assert [s.name for s in e0] != [s.name for s in e1]


@pytest.mark.parametrize("tiers", [["composite"], ["static", "composite"], ["bogus"], []])
def test_invalid_tiers(tmp_path, write_dataset, tiers):
    with pytest.raises(InvalidTierError):
        _stream(write_dataset(tmp_path), tiers)


def test_composite_needs_enough_samples(tmp_path, write_dataset):
    with pytest.raises(InsufficientSamplesError):
        _stream(write_dataset(tmp_path, n_images=2), ["dynamic", "composite"])


def test_mosaic_partners_come_from_other_images(tmp_path, write_dataset):
    stream = _stream(write_dataset(tmp_path, n_images=4), ["static", "dynamic", "composite"])
    assert len(stream) == 32
    for sample in stream:
        sources = [sample.provenance.source_id] + [name.split("__")[0] for name in sample.provenance.partners]
        assert len(set(sources)) == 4
