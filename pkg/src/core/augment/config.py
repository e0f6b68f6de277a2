"""Parámetros del esquema de aumentación en tres niveles (estático, dinámico, compuesto)."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


def _ordered(pair: tuple[float, float], name: str) -> tuple[float, float]:
    if pair[0] > pair[1]:
        raise ValueError(f"{name}: rango desordenado {pair}")
    return pair


def _odd_kernel(size: int) -> int:
    if size < 3 or size % 2 == 0:
        raise ValueError(f"el tamaño de kernel debe ser impar y >= 3, recibido {size}")
    return size


# =========================
# NIVEL ESTÁTICO
# =========================
class ClaheParams(BaseModel):
    clip_limit: float = Field(default=4.0, gt=0)
    tile_grid: int = Field(default=8, ge=1)


class NoiseParams(BaseModel):
    low: float = Field(default=0.9, ge=0)
    high: float = Field(default=1.1, ge=0)

    @model_validator(mode="after")
    def _range(self) -> NoiseParams:
        _ordered((self.low, self.high), "noise")
        return self


class MedianParams(BaseModel):
    kernel: int = 5

    @field_validator("kernel")
    @classmethod
    def _odd(cls, v: int) -> int:
        return _odd_kernel(v)


class MotionParams(BaseModel):
    kernel: int = 9

    @field_validator("kernel")
    @classmethod
    def _odd(cls, v: int) -> int:
        return _odd_kernel(v)


class DefocusParams(BaseModel):
    radius: int = Field(default=3, ge=1)


class ShuffleParams(BaseModel):
    windows: int = Field(default=1000, ge=0)
    min_side: int = Field(default=4, ge=1)
    max_side: int = Field(default=16, ge=1)

    @model_validator(mode="after")
    def _range(self) -> ShuffleParams:
        _ordered((self.min_side, self.max_side), "shuffle side")
        return self


class StaticConfig(BaseModel):
    clahe: ClaheParams = ClaheParams()
    noise: NoiseParams = NoiseParams()
    median: MedianParams = MedianParams()
    motion: MotionParams = MotionParams()
    defocus: DefocusParams = DefocusParams()
    shuffle: ShuffleParams = ShuffleParams()


# =========================
# NIVEL DINÁMICO
# =========================
class DynamicConfig(BaseModel):
    scale_p: float = Field(default=0.5, ge=0.0, le=1.0)
    scale_range: tuple[float, float] = (0.8, 1.2)
    erase_p: float = Field(default=0.5, ge=0.0, le=1.0)
    erase_area: tuple[float, float] = (0.02, 0.1)
    erase_aspect: tuple[float, float] = (0.3, 3.3)
    translate_p: float = Field(default=0.5, ge=0.0, le=1.0)
    translate_fraction: float = Field(default=0.1, ge=0, lt=1)
    jiggle_p: float = Field(default=0.5, ge=0.0, le=1.0)
    brightness: tuple[float, float] = (0.8, 1.2)
    contrast: tuple[float, float] = (0.8, 1.2)
    flip_p: float = Field(default=0.5, ge=0.0, le=1.0)
    min_area_fraction: float = Field(default=0.25, ge=0, le=1)

    @model_validator(mode="after")
    def _ranges(self) -> DynamicConfig:
        for name in ("scale_range", "erase_area", "erase_aspect", "brightness", "contrast"):
            lo, _ = _ordered(getattr(self, name), name)
            if lo <= 0:
                raise ValueError(f"{name}: los factores deben ser positivos")
        if self.erase_area[1] > 1:
            raise ValueError("erase_area: la fracción no puede superar 1")
        return self


# =========================
# NIVEL COMPUESTO
# =========================
class CompositeConfig(BaseModel):
    enabled: bool = True
    jitter_fraction: float = Field(default=0.5, ge=0, le=1)
    canvas_width: int = Field(default=512, ge=8)
    canvas_height: int = Field(default=512, ge=8)
    min_side: float = Field(default=2.0, ge=0)
    min_area_fraction: float = Field(default=0.25, ge=0, le=1)


class AugmentConfig(BaseModel):
    """Configuración completa; se carga desde JSON con la misma forma."""

    model_config = ConfigDict(frozen=True)

    static: StaticConfig = StaticConfig()
    dynamic: DynamicConfig = DynamicConfig()
    composite: CompositeConfig = CompositeConfig()
    master_seed: int = Field(default=0, ge=0, lt=2**64)
