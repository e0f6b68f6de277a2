"""Registro de cada corrida: entradas con su SHA-256, configuración, salidas y tiempo."""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Any

from pydantic import BaseModel, Field

from src.infrastructure.serialization import digest, write_json

REPORT_SUFFIX = ".run.json"


def file_digest(path: str | Path) -> str:
    """SHA-256 del archivo; para un directorio, de sus archivos en orden de ruta relativa."""
    path = Path(path)
    if path.is_dir():
        h = hashlib.sha256()
        for child in sorted(p for p in path.rglob("*") if p.is_file()):
            h.update(child.relative_to(path).as_posix().encode())
            h.update(b"\0")
            h.update(file_digest(child).encode())
        return h.hexdigest()
    return hashlib.sha256(path.read_bytes()).hexdigest()


class RunReport(BaseModel):
    command: str
    inputs: dict[str, str] = Field(default_factory=dict)
    config_digest: str | None = None
    outputs: list[str] = Field(default_factory=list)
    wall_time: float = 0.0

    def add_input(self, path: str | Path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_output(self, path: str | Path) -> None:
        if str(path) not in self.outputs:
            self.outputs.append(str(path))

    def set_config(self, config: Any) -> None:
        self.config_digest = digest(config)

    def stable_digest(self) -> str:
        """Huella de la corrida sin el tiempo de reloj."""
        return digest(self.model_dump(exclude={"wall_time"}))

    def write(self, main_output: str | Path) -> Path:
        missing = [p for p in self.outputs if not Path(p).exists()]
        if missing:
            raise FileNotFoundError(f"salidas declaradas que no existen: {missing}")
        return write_json(Path(str(main_output) + REPORT_SUFFIX), self)
