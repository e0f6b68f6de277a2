"""Semillas derivadas: un flujo aleatorio independiente por (imagen, nivel, transformación)."""

import hashlib

import numpy as np


def derive_seed(master_seed: int, *keys: object) -> int:
    """
    Mezcla determinística de la semilla maestra con las claves dadas.

    El resultado no depende del orden en que se procesen las imágenes ni del
    número de workers, solo de (master_seed, keys).
    """
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(int(master_seed)).encode())
    for key in keys:
        digest.update(b"\x1f")
        digest.update(str(key).encode())
    return int.from_bytes(digest.digest(), "little")


def rng_for(master_seed: int, *keys: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master_seed, *keys))
