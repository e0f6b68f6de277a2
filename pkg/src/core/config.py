import os

from dotenv import load_dotenv
from pydantic import BaseModel, Field, ValidationError, field_validator

from src.core.errors import ConfigError

# --- CONFIGURACIÓN ---
ENV_PREFIX = "ANGIO_"
DEFAULT_CROP_SIZE = 256
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class Settings(BaseModel):
    jobs: int = Field(default=1, ge=1, description="Workers para comandos batch (--jobs).")
    log_level: str = Field(default="INFO")
    mask_threshold: int = Field(default=128, ge=1, le=255, description="Umbral de binarización de PNG.")

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, v: str) -> str:
        if v.upper() not in LOG_LEVELS:
            raise ValueError(f"nivel de log desconocido: {v}")
        return v.upper()


def _clean(value: str) -> str:
    # Quita comillas sueltas (problema típico de --env-file en Docker)
    return value.strip().strip("'").strip('"')


def load_settings(env: dict[str, str] | None = None) -> Settings:
    """
    Carga la configuración desde el entorno (y `.env` si existe).

    Args:
        env: Entorno alternativo; por defecto `os.environ`.

    Returns:
        Settings validado.
    """
    if env is None:
        load_dotenv()
        env = dict(os.environ)

    values = {}
    for field in Settings.model_fields:
        raw = env.get(ENV_PREFIX + field.upper())
        if raw is not None and _clean(raw) != "":
            values[field] = _clean(raw)

    try:
        return Settings(**values)
    except ValidationError as e:
        raise ConfigError(f"Configuración inválida en el entorno: {e}") from e
