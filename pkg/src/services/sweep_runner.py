from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, Sequence, TypeVar

import psutil

from ..core.errors import ConfigError

logger = logging.getLogger(__name__)

Cell = TypeVar("Cell")
Row = TypeVar("Row")


def worker_count(requested: int | None = None) -> int:
    """Pool size: ``requested``, else RETENTION_LAB_WORKERS, else physical cores."""
    if requested is not None:
        if requested < 1:
            raise ConfigError(f"workers must be at least 1, got {requested}")
        return requested
    env = os.environ.get("RETENTION_LAB_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"RETENTION_LAB_WORKERS must be an integer, got {env!r}") from exc
        if value < 1:
            raise ConfigError(f"RETENTION_LAB_WORKERS must be at least 1, got {value}")
        return value
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


class SweepRunner:
    """Maps a picklable cell function over sweep cells in worker processes.

    Results come back in cell order whatever the completion order, so the
    output does not depend on the pool size.
    """

    def __init__(self, workers: int | None = None) -> None:
        self._workers = worker_count(workers)

    def map(self, fn: Callable[[Cell], Row], cells: Sequence[Cell]) -> list[Row]:
        if self._workers == 1 or len(cells) <= 1:
            return [fn(cell) for cell in cells]

        logger.info("Dispatching %d cells to %d worker processes", len(cells), self._workers)
        results: dict[int, Row] = {}
        with ProcessPoolExecutor(max_workers=min(self._workers, len(cells))) as executor:
            futures = {executor.submit(fn, cell): i for i, cell in enumerate(cells)}
            for future in as_completed(futures):
                results[futures[future]] = future.result()
        return [results[i] for i in range(len(cells))]
