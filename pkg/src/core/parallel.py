"""Ejecución por elemento con joblib; el resultado conserva el orden de entrada."""

from __future__ import annotations

import logging
from collections.abc import Callable, Sequence
from typing import TypeVar

from joblib import Parallel, delayed
from tqdm import tqdm

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def run_parallel(
    func: Callable[[T], R],
    items: Sequence[T],
    n_jobs: int = 1,
    desc: str | None = None,
    quiet: bool = True,
) -> list[R]:
    """
    Aplica `func` a cada elemento. Con n_jobs == 1 corre en el proceso actual.

    `func` debe ser pura y serializable con pickle para n_jobs > 1.
    """
    progress = tqdm(items, desc=desc, disable=quiet, leave=False)
    if n_jobs == 1 or len(items) <= 1:
        return [func(item) for item in progress]

    logger.debug("%s: %d elementos en %d workers", desc or "run_parallel", len(items), n_jobs)
    return Parallel(n_jobs=n_jobs)(delayed(func)(item) for item in progress)
