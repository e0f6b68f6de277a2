import numpy as np
import pytest

from src.core.errors import InputError, MissingMldPointError, UndefinedMetricError, UnknownImageError
from src.core.metrics.detection import (
    IOU_THRESHOLDS,
    MatchOutcome,
    average_precision,
    ctp_analysis,
    fitness,
    map_suite,
    match_at_iou,
    mld_match,
    mld_metrics,
)
from src.core.types import DatasetManifest, Detection, ImageRecord, LesionAnnotation

GRID = np.linspace(0.0, 1.0, 101)


def _record(image_id, lesions, size=200):
    return ImageRecord(id=image_id, path=f"{image_id}.png", width=size, height=size, lesions=lesions)


def _random_box(rng, size=100):
    x1, y1 = rng.uniform(0, size - 20, size=2)
    w, h = rng.uniform(5, 20, size=2)
    return [float(x1), float(y1), float(x1 + w), float(y1 + h)]


def _iou(a, b):
    iw = max(0.0, min(a[2], b[2]) - max(a[0], b[0]))
    ih = max(0.0, min(a[3], b[3]) - max(a[1], b[1]))
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


# --- oráculos ---


def reference_match(dets, gts, thresh):
    order = sorted(range(len(dets)), key=lambda i: -dets[i][1])
    taken = [False] * len(gts)
    ranked = []
    for i in order:
        best, best_iou = -1, -1.0
        for j, g in enumerate(gts):
            if taken[j]:
                continue
            v = _iou(dets[i][0], g)
            if v > best_iou:
                best, best_iou = j, v
        if best >= 0 and best_iou >= thresh:
            taken[best] = True
            ranked.append((dets[i][1], True))
        else:
            ranked.append((dets[i][1], False))
    return ranked, taken.count(False)


def reference_ap(ranked, n_gt):
    ranked = sorted(ranked, key=lambda r: -r[0])
    tp = fp = 0
    points = []
    for _, hit in ranked:
        tp, fp = tp + hit, fp + (not hit)
        points.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for r in GRID:
        total += max((p for rec, p in points if rec >= r), default=0.0)
    return total / len(GRID)


# --- match_at_iou ---


def test_match_examples(make_det, make_gt):
    gts = [make_gt(0, 0, 10, 10)]
    perfect = match_at_iou([make_det(0, 0, 10, 10)], gts, 0.5)
    assert (perfect.tp, perfect.fp, perfect.fn) == (1, 0, 0)

    one_third = match_at_iou([make_det(5, 0, 15, 10)], gts, 0.5)
    assert (one_third.tp, one_third.fp, one_third.fn) == (0, 1, 1)

    duplicate = match_at_iou([make_det(0, 0, 10, 10, 0.9), make_det(0, 0, 10, 10, 0.8)], gts, 0.5)
    assert (duplicate.tp, duplicate.fp, duplicate.fn) == (1, 1, 0)
    assert duplicate.matches[0][0].confidence == 0.9


def test_match_higher_confidence_wins(make_det, make_gt):
    gts = [make_gt(0, 0, 10, 10)]
    low, high = make_det(0, 0, 10, 10, 0.2), make_det(1, 1, 10, 10, 0.95)
    outcome = match_at_iou([low, high], gts, 0.5)
    assert outcome.matches[0][0] is high
    assert outcome.fp_detections == [low]


def test_match_counts_and_oracle(rng, make_det, make_gt):
    for _ in range(300):
        gts_raw = [_random_box(rng) for _ in range(int(rng.integers(0, 6)))]
        dets_raw = [(_random_box(rng), float(rng.random())) for _ in range(int(rng.integers(0, 6)))]
        gts = [make_gt(*g) for g in gts_raw]
        dets = [make_det(*b, conf=c) for b, c in dets_raw]
        thresh = float(rng.choice(IOU_THRESHOLDS))

        outcome = match_at_iou(dets, gts, thresh)
        assert outcome.tp + outcome.fn == len(gts)
        assert outcome.tp + outcome.fp == len(dets)

        ranked, fn = reference_match(dets_raw, gts_raw, thresh)
        assert [hit for _, hit in outcome.ranked] == [hit for _, hit in ranked]
        assert outcome.fn == fn


def test_invalid_threshold(make_det, make_gt):
    with pytest.raises(InputError):
        match_at_iou([make_det(0, 0, 1, 1)], [make_gt(0, 0, 1, 1)], 1.0)


# --- average_precision / fitness ---


def test_ap_perfect_and_empty(make_det, make_gt):
    gts = [make_gt(0, 0, 10, 10), make_gt(20, 20, 30, 30)]
    dets = [make_det(0, 0, 10, 10), make_det(20, 20, 30, 30)]
    assert average_precision([match_at_iou(dets, gts, 0.5)]) == 1.0
    assert average_precision([match_at_iou([], gts, 0.5)]) == 0.0


def test_ap_half_recall(make_det, make_gt):
    gts = [make_gt(0, 0, 10, 10), make_gt(20, 20, 30, 30)]
    ap = average_precision([match_at_iou([make_det(0, 0, 10, 10)], gts, 0.5)])
    assert ap == pytest.approx(51 / 101)


def test_ap_without_annotations_is_undefined(make_det):
    with pytest.raises(UndefinedMetricError):
        average_precision([match_at_iou([make_det(0, 0, 1, 1)], [], 0.5)])


def test_fitness():
    assert fitness(1.0, 1.0) == 1.0
    assert fitness(0.5, 0.2) == pytest.approx(0.9 * 0.2 + 0.1 * 0.5)
    with pytest.raises(InputError):
        fitness(1.2, 0.3)


# --- map_suite ---


def _cohort(rng, n_images=20):
    records, dets, raw = [], [], {}
    for k in range(n_images):
        image_id = f"img{k:02d}"
        gts_raw = [_random_box(rng) for _ in range(int(rng.integers(0, 4)))]
        records.append(_record(image_id, [LesionAnnotation(bbox=g) for g in gts_raw]))
        dets_raw = []
        for g in gts_raw:
            if rng.random() < 0.8:
                jitter = rng.normal(0, 2, size=4)
                b = np.clip(np.array(g) + jitter, 0, 199)
                b[2:] = np.maximum(b[2:], b[:2] + 1)
                dets_raw.append((b.tolist(), float(rng.random())))
        for _ in range(int(rng.integers(0, 3))):
            dets_raw.append((_random_box(rng), float(rng.random())))
        dets.extend(Detection(image_id=image_id, bbox=b, confidence=c) for b, c in dets_raw)
        raw[image_id] = (dets_raw, gts_raw)
    return DatasetManifest(images=records), dets, raw


def test_map_suite_matches_reference(rng):
    manifest, dets, raw = _cohort(rng)
    image, lesion = map_suite(dets, manifest)

    aps, img_aps50, img_aps95, recalls, precisions = [], [], [], [], []
    n_gt = sum(len(g) for _, g in raw.values())
    for t in IOU_THRESHOLDS:
        ranked_all = []
        for image_id in sorted(raw):
            ranked, _ = reference_match(*raw[image_id], t)
            ranked_all.extend(ranked)
        aps.append(reference_ap(ranked_all, n_gt))

    tp50 = fp50 = 0
    for image_id in sorted(raw):
        dets_raw, gts_raw = raw[image_id]
        ranked, fn = reference_match(dets_raw, gts_raw, 0.5)
        tp = sum(hit for _, hit in ranked)
        tp50, fp50 = tp50 + tp, fp50 + len(ranked) - tp
        if ranked:
            precisions.append(tp / len(ranked))
        if gts_raw:
            recalls.append(tp / len(gts_raw))
            per_t = [reference_ap(reference_match(dets_raw, gts_raw, t)[0], len(gts_raw)) for t in IOU_THRESHOLDS]
            img_aps50.append(per_t[0])
            img_aps95.append(np.mean(per_t))

    assert lesion.map50 == pytest.approx(aps[0], abs=1e-9)
    assert lesion.map5095 == pytest.approx(np.mean(aps), abs=1e-9)
    assert lesion.recall == pytest.approx(tp50 / n_gt, abs=1e-9)
    assert lesion.precision == pytest.approx(tp50 / (tp50 + fp50), abs=1e-9)
    assert image.precision == pytest.approx(np.mean(precisions), abs=1e-9)
    assert image.recall == pytest.approx(np.mean(recalls), abs=1e-9)
    assert image.map50 == pytest.approx(np.mean(img_aps50), abs=1e-9)
    assert image.map5095 == pytest.approx(np.mean(img_aps95), abs=1e-9)
    assert image.recall_sd == pytest.approx(np.std(recalls, ddof=1), abs=1e-9)


def test_map5095_never_exceeds_map50(rng):
    for _ in range(10):
        manifest, dets, _ = _cohort(rng, n_images=6)
        if not any(r.lesions for r in manifest.images):
            continue
        image, lesion = map_suite(dets, manifest)
        assert lesion.map5095 <= lesion.map50 + 1e-12


def test_map_suite_perfect_predictions():
    manifest = DatasetManifest(
        images=[_record("a", [LesionAnnotation(bbox=[10, 10, 50, 50])]), _record("b", [LesionAnnotation(bbox=[5, 5, 20, 30])])]
    )
    dets = [
        Detection(image_id="a", bbox=[10, 10, 50, 50], confidence=0.9),
        Detection(image_id="b", bbox=[5, 5, 20, 30], confidence=0.8),
    ]
    image, lesion = map_suite(dets, manifest)
    for summary in (image, lesion):
        assert (summary.precision, summary.recall, summary.map50, summary.map5095) == (1.0, 1.0, 1.0, 1.0)
    assert fitness(lesion.map50, lesion.map5095) == 1.0


def test_map_suite_without_detections():
    manifest = DatasetManifest(images=[_record("a", [LesionAnnotation(bbox=[10, 10, 50, 50])])])
    image, lesion = map_suite([], manifest)
    assert lesion.recall == 0.0
    assert lesion.map50 == 0.0
    assert lesion.precision is None
    assert image.precision is None


def test_map_suite_errors():
    manifest = DatasetManifest(images=[_record("a", [])])
    with pytest.raises(UndefinedMetricError):
        map_suite([], manifest)
    with pytest.raises(UnknownImageError):
        map_suite([Detection(image_id="zzz", bbox=[0, 0, 1, 1], confidence=0.5)], manifest)


# --- mld_match / mld_metrics ---


def test_mld_match_examples(make_det, make_gt):
    gts = [make_gt(10, 10, 30, 30, mld=(20, 20))]
    hit = mld_match([make_det(15, 15, 25, 25)], gts)
    assert (hit.tp, hit.fp, hit.fn) == (1, 0, 0)

    miss = mld_match([make_det(0, 0, 5, 5)], gts)
    assert (miss.tp, miss.fp, miss.fn) == (0, 1, 1)

    edge = mld_match([make_det(20, 20, 40, 40)], gts)
    assert edge.tp == 1


def test_mld_match_prefers_higher_iou(make_det, make_gt):
    gts = [make_gt(0, 0, 40, 40, mld=(20, 20)), make_gt(15, 15, 25, 25, mld=(20, 20))]
    outcome = mld_match([make_det(14, 14, 26, 26)], gts)
    assert outcome.matches[0][1] is gts[1]
    assert outcome.fn_annotations == [gts[0]]


def test_mld_match_requires_points(make_det, make_gt):
    with pytest.raises(MissingMldPointError):
        mld_match([make_det(0, 0, 5, 5)], [make_gt(0, 0, 5, 5)])


def test_mld_metrics_values(make_det, make_gt):
    gts = [make_gt(10, 10, 30, 30, mld=(20, 20)), make_gt(50, 50, 70, 70, mld=(60, 60))]
    dets = [make_det(15, 15, 25, 25, 0.9), make_det(100, 100, 110, 110, 0.8)]
    result = mld_metrics(mld_match(dets, gts))
    assert (result.mld_precision, result.mld_recall) == (0.5, 0.5)
    assert result.mld_f1 == pytest.approx(0.5)


def test_mld_metrics_invariant_to_confidence_rescaling(rng, make_det, make_gt):
    for _ in range(50):
        gts = []
        for _ in range(int(rng.integers(1, 5))):
            b = _random_box(rng)
            gts.append(make_gt(*b, mld=((b[0] + b[2]) / 2, (b[1] + b[3]) / 2)))
        confs = rng.random(int(rng.integers(1, 6)))
        boxes = [_random_box(rng) for _ in confs]
        a = mld_metrics(mld_match([make_det(*b, conf=float(c)) for b, c in zip(boxes, confs)], gts))
        b = mld_metrics(mld_match([make_det(*bx, conf=float(c) ** 2) for bx, c in zip(boxes, confs)], gts))
        assert a == b


def _outcome(tp, fp, fn, make_det, make_gt):
    det, gt = make_det(0, 0, 1, 1), make_gt(0, 0, 1, 1)
    return MatchOutcome(
        matches=[(det, gt, 1.0)] * tp, fp_detections=[det] * fp, fn_annotations=[gt] * fn
    )


def test_reclassifying_ctp_never_hurts(rng, make_det, make_gt):
    for _ in range(100):
        tp, fp, fn = (int(v) for v in rng.integers(0, 8, size=3))
        if tp + fp == 0 or tp + fn == 0:
            continue
        m = _outcome(tp, fp, fn, make_det, make_gt)
        k = int(rng.integers(0, fp + 1))
        as_fp, as_tp = mld_metrics(m, k, "ctp_as_fp"), mld_metrics(m, k, "ctp_as_tp")
        assert as_tp.mld_precision >= as_fp.mld_precision
        assert as_tp.mld_recall >= as_fp.mld_recall
        assert as_tp.fn == as_fp.fn


def test_mld_metrics_undefined(make_det, make_gt):
    with pytest.raises(UndefinedMetricError):
        mld_metrics(_outcome(0, 0, 2, make_det, make_gt))
    with pytest.raises(UndefinedMetricError):
        mld_metrics(_outcome(0, 2, 0, make_det, make_gt))
    with pytest.raises(InputError):
        mld_metrics(_outcome(1, 1, 0, make_det, make_gt), ctp_count=2)


# --- ctp_analysis ---


def test_ctp_flags():
    gt = [float(v) for v in range(2, 42)]
    analysis = ctp_analysis([np.median(gt), 100.0], gt)
    assert analysis.flags == [True, False]
    assert analysis.ctp_count == 1
    assert analysis.p_values[1] < 0.05


def test_ctp_as_tp_with_every_fp_flagged(make_det, make_gt):
    m = _outcome(3, 2, 1, make_det, make_gt)
    gt = [4.0, 5.0, 6.0, 7.0]
    analysis = ctp_analysis([5.5, 5.5], gt, outcome=m)
    assert analysis.ctp_count == 2
    assert analysis.ctp_as_tp.mld_precision == 1.0
    assert analysis.ctp_as_fp.mld_precision == pytest.approx(0.6)


def test_ctp_empty_reference():
    with pytest.raises(InputError):
        ctp_analysis([1.0], [])
