"""
Comandos de la CLI. Cada uno recibe los argumentos ya parseados, la
configuración y el RunReport de la corrida, y devuelve el código de salida.
"""

from __future__ import annotations

import argparse
import logging
from collections import defaultdict
from functools import partial
from pathlib import Path
from typing import Any

import pandas as pd
from tqdm import tqdm

from src.core.augment import AugmentConfig, build_training_stream
from src.core.config import Settings
from src.core.errors import DimensionMismatchError, InputError, SchemaError, UndefinedMetricError, UnknownImageError
from src.core.geometry import resize_mask
from src.core.metrics.detection import (
    ctp_analysis,
    fitness,
    map_suite,
    merge_outcomes,
    mld_match,
    mld_metrics,
)
from src.core.metrics.segmentation import SCORE_COLUMNS, score_pair
from src.core.parallel import run_parallel
from src.core.phantoms import dumbbell, embed, taper
from src.core.severity import estimate_severity, radius_profile, severity_from_crop
from src.core.stats import AgreementReport, bland_altman, severity_agreement
from src.core.types import CropContext, DatasetManifest, ImageRecord
from src.infrastructure.io import (
    RecordImageLoader,
    load_detections,
    load_manifest,
    load_model,
    paired_pngs,
    read_mask,
    read_pairs_csv,
    write_csv,
    write_png,
)
from src.infrastructure.run_report import RunReport
from src.infrastructure.serialization import write_json

logger = logging.getLogger(__name__)

PHANTOM_PARAMS = (
    "kind",
    "bulb_radius",
    "neck_half_width",
    "neck_length",
    "healthy_half_width",
    "narrow_half_width",
    "canvas",
)


def _say(args: argparse.Namespace, message: str) -> None:
    if not args.quiet:
        print(message)


def _written(report: RunReport, path: str | Path) -> Path:
    report.add_output(path)
    return Path(path)


# =========================
# severity
# =========================
def cmd_severity(args: argparse.Namespace, settings: Settings, report: RunReport) -> int:
    mask = read_mask(args.mask, settings.mask_threshold)
    report.add_input(args.mask)
    params = {
        "min_prominence": args.min_prominence,
        "min_separation": args.min_separation,
        "trim_fraction": args.trim_fraction,
    }
    report.set_config({**params, "mask_threshold": settings.mask_threshold})

    if args.context:
        ctx = load_model(args.context, CropContext)
        report.add_input(args.context)
        result = severity_from_crop(mask, ctx, **params)
    else:
        result = estimate_severity(mask, **params)

    write_json(_written(report, args.out), result)
    if args.profile:
        write_csv(_written(report, args.profile), radius_profile(mask).to_frame())

    flag = " (clínicamente significativa)" if result.is_significant() else ""
    _say(args, f"✅ MLD={result.mld_px:.2f}px MAD={result.mad_px:.2f}px DS={result.ds_percent:.1f}%{flag}")
    return 0


# =========================
# eval-detect
# =========================
def _overlap_payload(dets, manifest: DatasetManifest) -> tuple[dict[str, Any], int]:
    try:
        image, lesion = map_suite(dets, manifest)
    except UndefinedMetricError as e:
        logger.error("%s", e)
        return {"mode": "overlap", "image_level": None, "lesion_level": None, "fitness": None, "error": str(e)}, 3
    return {
        "mode": "overlap",
        "image_level": image,
        "lesion_level": lesion,
        "fitness": fitness(lesion.map50, lesion.map5095),
    }, 0


def _mld_payload(dets, manifest: DatasetManifest, args: argparse.Namespace) -> tuple[dict[str, Any], int]:
    by_id = manifest.by_id()
    per_image = defaultdict(list)
    for det in dets:
        if det.image_id not in by_id:
            raise UnknownImageError(f"detección con image_id desconocido: {det.image_id!r}")
        per_image[det.image_id].append(det)
    merged = merge_outcomes([mld_match(per_image[i], by_id[i].lesions) for i in sorted(by_id)])

    payload: dict[str, Any] = {"mode": "mld", "metrics": None, "ctp": None, "reclassified": None}
    ctp_count = 0
    if args.ctp or args.ctp_as_tp:
        missing = sorted({d.image_id for d in merged.fp_detections if d.mld_px is None})
        if missing:
            raise SchemaError(f"falsos positivos sin mld_px en las imágenes: {missing}")
        gt_mlds = [ann.mld_px for rec in manifest.images for ann in rec.lesions if ann.mld_px is not None]
        analysis = ctp_analysis([d.mld_px for d in merged.fp_detections], gt_mlds, args.alpha)
        ctp_count = analysis.ctp_count
        payload["ctp"] = {
            **analysis.model_dump(exclude={"ctp_as_fp", "ctp_as_tp"}),
            "fp_image_ids": [d.image_id for d in merged.fp_detections],
        }

    try:
        payload["metrics"] = mld_metrics(merged, ctp_count, "ctp_as_fp")
        if args.ctp_as_tp:
            payload["reclassified"] = mld_metrics(merged, ctp_count, "ctp_as_tp")
    except UndefinedMetricError as e:
        logger.error("%s", e)
        payload["error"] = str(e)
        return payload, 3
    return payload, 0


def cmd_eval_detect(args: argparse.Namespace, settings: Settings, report: RunReport) -> int:
    manifest = load_manifest(args.manifest)
    dets = load_detections(args.detections)
    report.add_input(args.manifest)
    report.add_input(args.detections)
    report.set_config({"mode": args.mode, "ctp": args.ctp, "ctp_as_tp": args.ctp_as_tp, "alpha": args.alpha})

    if args.mode == "overlap":
        payload, code = _overlap_payload(dets, manifest)
    else:
        payload, code = _mld_payload(dets, manifest, args)

    write_json(_written(report, args.out), payload)
    _say(args, f"{'✅' if code == 0 else '⚠️ '} Métricas ({args.mode}) escritas en {args.out}")
    return code


# =========================
# eval-seg
# =========================
def _score_files(item: tuple[str, Path, Path], size: int, threshold: int) -> dict[str, Any]:
    name, gt_path, pred_path = item
    gt, pred = read_mask(gt_path, threshold), read_mask(pred_path, threshold)
    if gt.shape != pred.shape:
        raise DimensionMismatchError(f"{name}: gt {gt.shape} y pred {pred.shape} no coinciden")
    if size > 0:
        gt, pred = resize_mask(gt, size, size), resize_mask(pred, size, size)
    return {"name": name, **score_pair(pred, gt).as_row()}


def seg_summary(rows: pd.DataFrame) -> pd.DataFrame:
    """Agrega filas `mean` y `sd` (muestral; 0 con una sola fila)."""
    values = rows[SCORE_COLUMNS]
    counts = values.count()
    sd = values.std(ddof=1).where(counts > 1, 0.0).where(counts > 0)
    summary = pd.DataFrame([values.mean(), sd])
    summary.insert(0, "name", ["mean", "sd"])
    return pd.concat([rows, summary], ignore_index=True)


def cmd_eval_seg(args: argparse.Namespace, settings: Settings, report: RunReport) -> int:
    pairs = paired_pngs(args.gt, args.pred)
    report.add_input(args.gt)
    report.add_input(args.pred)
    report.set_config({"size": args.size, "mask_threshold": settings.mask_threshold})

    score = partial(_score_files, size=args.size, threshold=settings.mask_threshold)
    rows = run_parallel(score, pairs, args.jobs, desc="eval-seg", quiet=args.quiet)
    table = seg_summary(pd.DataFrame(rows, columns=["name", *SCORE_COLUMNS]))
    write_csv(_written(report, args.out), table)
    _say(args, f"✅ {len(rows)} pares evaluados -> {args.out}")
    return 0


# =========================
# augment
# =========================
def cmd_augment(args: argparse.Namespace, settings: Settings, report: RunReport) -> int:
    manifest_path = Path(args.manifest)
    manifest = load_manifest(manifest_path)
    report.add_input(manifest_path)
    cfg = AugmentConfig()
    if args.config:
        cfg = load_model(args.config, AugmentConfig)
        report.add_input(args.config)
    if args.seed is not None:
        cfg = cfg.model_copy(update={"master_seed": args.seed})
    tiers = [t.strip() for t in args.tiers.split(",") if t.strip()]
    report.set_config({"augment": cfg, "tiers": sorted(tiers), "epoch": args.epoch, "final_epochs": args.final_epochs})

    stream = build_training_stream(
        manifest,
        cfg,
        tiers,
        RecordImageLoader(manifest_path.parent),
        epoch=args.epoch,
        final_epochs=args.final_epochs,
        n_jobs=args.jobs,
        quiet=args.quiet,
    )

    out_dir = Path(args.out)
    records = []
    for sample in tqdm(stream, desc="escribiendo", disable=args.quiet, leave=False):
        rel = f"images/{sample.name}.png"
        write_png(out_dir / rel, sample.image)
        records.append(
            ImageRecord(
                id=sample.name,
                path=rel,
                width=sample.image.width,
                height=sample.image.height,
                lesions=list(sample.annotations),
                provenance=sample.provenance.as_dict(),
            )
        )
    write_json(out_dir / "manifest.json", DatasetManifest(images=records))
    _written(report, out_dir)
    _say(args, f"✅ {len(records)} muestras escritas en {out_dir}")
    return 0


# =========================
# agree
# =========================
def cmd_agree(args: argparse.Namespace, settings: Settings, report: RunReport) -> int:
    pred, gt = read_pairs_csv(args.pairs)
    report.add_input(args.pairs)
    report.set_config(
        {
            "gt_thresh": args.gt_thresh,
            "pred_thresh": args.pred_thresh,
            "iters": args.iters,
            "level": args.level,
            "seed": args.seed,
        }
    )

    ba = bland_altman(pred, gt)
    code = 0
    try:
        payload: dict[str, Any] = severity_agreement(
            pred, gt, args.gt_thresh, args.pred_thresh, iters=args.iters, level=args.level, seed=args.seed
        ).model_dump()
    except UndefinedMetricError as e:
        logger.error("%s", e)
        payload = {name: None for name in AgreementReport.model_fields}
        payload.update(
            n=len(pred),
            gt_thresh=args.gt_thresh,
            pred_thresh=args.pred_thresh,
            **ba.model_dump(include={"mad", "sd", "abs_sd", "mean_diff", "loa_low", "loa_high"}),
            error=str(e),
        )
        code = 3

    out = Path(args.out)
    write_json(_written(report, out), payload)
    points = Path(args.points) if args.points else out.with_name(out.stem + "_bland_altman.csv")
    write_csv(_written(report, points), ba.to_frame())
    _say(args, f"{'✅' if code == 0 else '⚠️ '} MAD={ba.mad:.3f}px ± {ba.abs_sd:.3f} -> {out}")
    return code


# =========================
# phantom
# =========================
def cmd_phantom(args: argparse.Namespace, settings: Settings, report: RunReport) -> int:
    try:
        if args.kind == "dumbbell":
            mask = dumbbell(
                bulb_radius=args.bulb_radius, neck_half_width=args.neck_half_width, neck_length=args.neck_length
            )
            mld, mad = 2.0 * args.neck_half_width, 2.0 * args.bulb_radius
        else:
            mask = taper(healthy_half_width=args.healthy_half_width, narrow_half_width=args.narrow_half_width)
            mld, mad = 2.0 * args.narrow_half_width, 2.0 * args.healthy_half_width
    except ValueError as e:
        raise InputError(f"parámetros de fantoma inválidos: {e}") from e
    report.set_config({k: v for k, v in vars(args).items() if k in PHANTOM_PARAMS})

    if args.canvas:
        if args.canvas < max(mask.width, mask.height):
            raise SchemaError(f"--canvas {args.canvas} es menor que el fantoma ({mask.width}x{mask.height})")
        mask = embed(mask, args.canvas, args.canvas, (args.canvas - mask.width) // 2, (args.canvas - mask.height) // 2)

    write_png(_written(report, args.out), mask)
    _say(args, f"✅ Fantoma {args.kind} {mask.width}x{mask.height}: MLD={mld:.0f}px MAD={mad:.0f}px -> {args.out}")
    return 0
