"""
Flujo de entrenamiento piramidal: estático -> dinámico -> compuesto.

Cada nivel superior se aplica sobre la salida del inferior. Todas las
semillas se derivan de (master_seed, nombre de muestra, nivel, época), por lo
que el flujo no depende del número de workers.
"""

from __future__ import annotations

import logging
from collections import defaultdict
from collections.abc import Callable, Iterable
from functools import partial

import numpy as np

from src.core.augment.composite import MOSAIC_SIZE, mosaic
from src.core.augment.config import AugmentConfig
from src.core.augment.dynamic import apply_dynamic
from src.core.augment.sample import AugmentedSample, Provenance
from src.core.augment.seeding import derive_seed, rng_for
from src.core.augment.static import static_expand
from src.core.errors import InsufficientSamplesError, InvalidTierError
from src.core.parallel import run_parallel
from src.core.types import BinaryMask, DatasetManifest, GrayImage, ImageRecord

logger = logging.getLogger(__name__)

TIERS = ("static", "dynamic", "composite")

ImageLoader = Callable[[ImageRecord], GrayImage]
MaskLoader = Callable[[ImageRecord], BinaryMask | None]


def validate_tiers(tiers: Iterable[str]) -> frozenset[str]:
    chosen = frozenset(tiers)
    unknown = sorted(chosen - set(TIERS))
    if unknown:
        raise InvalidTierError(f"niveles desconocidos: {unknown}; válidos: {list(TIERS)}")
    if not chosen:
        raise InvalidTierError("se requiere al menos un nivel")
    if "composite" in chosen and "dynamic" not in chosen:
        raise InvalidTierError("el nivel compuesto requiere el nivel dinámico debajo")
    return chosen


def _expand_image(
    record: ImageRecord,
    cfg: AugmentConfig,
    tiers: frozenset[str],
    epoch: int,
    loader: ImageLoader,
    mask_loader: MaskLoader | None,
) -> list[AugmentedSample]:
    image = loader(record)
    mask = mask_loader(record) if mask_loader is not None else None
    anns = tuple(record.lesions)

    if "static" in tiers:
        seed = derive_seed(cfg.master_seed, record.id, "static")
        samples = static_expand(image, anns, cfg, seed, source_id=record.id, mask=mask)
    else:
        samples = [AugmentedSample(image, anns, Provenance(source_id=record.id, seed=cfg.master_seed), mask)]

    if "dynamic" in tiers:
        out = []
        for sample in samples:
            seed = derive_seed(cfg.master_seed, sample.name, "dynamic", epoch)
            out.append(apply_dynamic(sample, cfg, rng_for(seed), tag=f"dynamic-e{epoch}", seed=seed))
        samples = out
    return samples


def _compose_group(item: tuple[tuple[AugmentedSample, ...], int], cfg: AugmentConfig, epoch: int) -> AugmentedSample:
    group, seed = item
    return mosaic(group, cfg, rng_for(seed), tag=f"mosaic-e{epoch}", seed=seed)


def _partner_indices(pool: list[AugmentedSample], i: int, rng: np.random.Generator) -> list[int]:
    """
    Tres compañeras de fuentes distintas entre sí y de la muestra `i`; si no
    hay tres fuentes más, cualquier otra muestra del pool.
    """
    source = pool[i].provenance.source_id
    by_source: dict[str, list[int]] = defaultdict(list)
    for j, s in enumerate(pool):
        if s.provenance.source_id != source:
            by_source[s.provenance.source_id].append(j)

    if len(by_source) >= MOSAIC_SIZE - 1:
        sources = sorted(by_source)
        chosen = rng.choice(len(sources), size=MOSAIC_SIZE - 1, replace=False)
        return [by_source[sources[k]][int(rng.integers(len(by_source[sources[k]])))] for k in chosen]

    others = [j for j in range(len(pool)) if j != i]
    return [others[k] for k in rng.choice(len(others), size=MOSAIC_SIZE - 1, replace=False)]


def _mosaic_groups(
    pool: list[AugmentedSample], cfg: AugmentConfig, epoch: int
) -> list[tuple[tuple[AugmentedSample, ...], int]]:
    """Para cada muestra, 3 compañeras distintas elegidas con su propio flujo."""
    groups = []
    for i, sample in enumerate(pool):
        seed = derive_seed(cfg.master_seed, "composite", epoch, sample.name)
        picks = _partner_indices(pool, i, rng_for(seed, "partners"))
        groups.append(((sample,) + tuple(pool[j] for j in picks), seed))
    return groups


def build_training_stream(
    manifest: DatasetManifest,
    cfg: AugmentConfig,
    tiers: Iterable[str],
    loader: ImageLoader,
    epoch: int = 0,
    final_epochs: bool = False,
    n_jobs: int = 1,
    mask_loader: MaskLoader | None = None,
    quiet: bool = True,
) -> list[AugmentedSample]:
    """
    Materializa el flujo de una época, ordenado por id de imagen.

    - static: 8 muestras por imagen (sin él, solo la original).
    - dynamic: un sorteo por muestra y época.
    - composite: un mosaico por muestra, salvo con `final_epochs` o si
      `cfg.composite.enabled` es falso.
    """
    chosen = validate_tiers(tiers)
    records = sorted(manifest.images, key=lambda r: r.id)
    expand = partial(_expand_image, cfg=cfg, tiers=chosen, epoch=epoch, loader=loader, mask_loader=mask_loader)
    pool = [s for batch in run_parallel(expand, records, n_jobs, desc="aumentación", quiet=quiet) for s in batch]

    if "composite" not in chosen or final_epochs or not cfg.composite.enabled:
        logger.info("flujo época %d: %d muestras (niveles %s)", epoch, len(pool), sorted(chosen))
        return pool

    if len(pool) < MOSAIC_SIZE:
        raise InsufficientSamplesError(f"el mosaico requiere al menos {MOSAIC_SIZE} muestras, hay {len(pool)}")
    compose = partial(_compose_group, cfg=cfg, epoch=epoch)
    stream = run_parallel(compose, _mosaic_groups(pool, cfg, epoch), n_jobs, desc="mosaico", quiet=quiet)
    logger.info("flujo época %d: %d muestras (niveles %s)", epoch, len(stream), sorted(chosen))
    return stream
