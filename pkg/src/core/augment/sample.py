from __future__ import annotations

from dataclasses import dataclass, field, replace

from src.core.types import BinaryMask, GrayImage, LesionAnnotation


@dataclass(frozen=True)
class Provenance:
    """
    Origen de una muestra; junto con la configuración determina sus bytes.

    `tags` identifica los pasos por nivel (p. ej. "static-clahe", "dynamic-e0")
    y forma el nombre de archivo; `ops` lista las transformaciones dinámicas
    que efectivamente se aplicaron.
    """

    source_id: str
    tiers: tuple[str, ...] = ()
    tags: tuple[str, ...] = ()
    ops: tuple[str, ...] = ()
    partners: tuple[str, ...] = ()
    seed: int = 0

    def extend(self, tier: str, tag: str, seed: int, ops: tuple[str, ...] = ()) -> Provenance:
        tiers = self.tiers if tier in self.tiers else self.tiers + (tier,)
        return replace(self, tiers=tiers, tags=self.tags + (tag,), ops=self.ops + ops, seed=seed)

    def as_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "tiers": list(self.tiers),
            "tags": list(self.tags),
            "ops": list(self.ops),
            "partners": list(self.partners),
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class AugmentedSample:
    image: GrayImage
    annotations: tuple[LesionAnnotation, ...]
    provenance: Provenance
    mask: BinaryMask | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "annotations", tuple(self.annotations))
        for ann in self.annotations:
            b = ann.bbox
            if b.x_max > self.image.width or b.y_max > self.image.height:
                raise ValueError(f"caja {b.model_dump()} fuera de la imagen {self.image.width}x{self.image.height}")
        if self.mask is not None and self.mask.shape != self.image.pixels.shape:
            raise ValueError("la máscara no coincide con la imagen")

    @property
    def name(self) -> str:
        """Nombre estable de archivo: id de origen más las etiquetas de cada nivel."""
        return "__".join((self.provenance.source_id,) + self.provenance.tags)
