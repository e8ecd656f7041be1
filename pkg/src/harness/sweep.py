from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..algorithms.mean_estimation import baseline_run, run_alg1, run_improved
from ..algorithms.regression import ols_baseline, run_alg2
from ..config.models import RunConfig, SweepSpec
from ..core.types import RunResult
from ..services.sweep_runner import SweepRunner

from .report import SWEEP_COLUMNS, render_csv

logger = logging.getLogger(__name__)

RUNNERS: dict[str, Callable[[RunConfig], RunResult]] = {
    "alg1": run_alg1,
    "improved": run_improved,
    "alg2": run_alg2,
    "baseline_mean": baseline_run,
    "baseline_ols": ols_baseline,
}


@dataclass(frozen=True)
class SweepRow:
    algorithm: str
    axis: str
    value: float
    seed: int
    sq_error: float
    max_encoding_error: float
    compliance_ok: bool
    status: str = "ok"

    def cells(self) -> tuple:
        return (
            self.algorithm, self.axis, self.value, self.seed,
            self.sq_error, self.max_encoding_error, self.compliance_ok, self.status,
        )


@dataclass(frozen=True)
class SweepAggregate:
    value: float
    mean: float
    stderr: float
    runs: int


@dataclass(frozen=True)
class SweepTable:
    spec: SweepSpec
    rows: tuple[SweepRow, ...]
    aggregates: tuple[SweepAggregate, ...]

    def aggregate(self, value: float) -> SweepAggregate:
        for agg in self.aggregates:
            if agg.value == value:
                return agg
        raise KeyError(value)

    def to_csv(self) -> str:
        """Per-seed rows, then a mean and a stderr row per axis value."""
        lines = [row.cells() for row in self.rows]
        for agg in self.aggregates:
            for label, stat in (("mean", agg.mean), ("stderr", agg.stderr)):
                lines.append((
                    self.spec.algorithm, self.spec.axis, agg.value, label,
                    stat, math.nan, "", f"aggregate of {agg.runs}",
                ))
        return render_csv(SWEEP_COLUMNS, lines)


def axis_value(spec: SweepSpec, value: float) -> float | int:
    return float(value) if spec.axis == "sigma" else int(value)


def run_cell(cell: tuple[str, str, float, RunConfig]) -> SweepRow:
    """Run one (axis value, seed) cell; failures become a row status."""
    algorithm, axis, value, cfg = cell
    try:
        result = RUNNERS[algorithm](cfg)
    except Exception as exc:
        logger.exception("Sweep cell %s=%s seed=%d failed", axis, value, cfg.seed)
        return SweepRow(algorithm, axis, value, cfg.seed, math.nan, math.nan, False, f"error: {exc}")
    return SweepRow(
        algorithm, axis, value, cfg.seed,
        result.squared_error, result.max_encoding_error, result.compliance_ok,
    )


def _aggregate(value: float, rows: list[SweepRow]) -> SweepAggregate:
    errors = np.array([r.sq_error for r in rows if r.status == "ok"])
    if errors.size == 0:
        return SweepAggregate(value, math.nan, math.nan, 0)
    stderr = float(errors.std(ddof=1) / math.sqrt(errors.size)) if errors.size > 1 else 0.0
    return SweepAggregate(value, float(errors.mean()), stderr, int(errors.size))


def run_sweep(spec: SweepSpec, workers: int | None = None) -> SweepTable:
    """Run every (axis value, seed) cell of ``spec``.

    Seed i of every axis value is ``base.seed + i``, so runs are paired across
    values. Rows are sorted by (value, seed) before aggregation.
    """
    cells = []
    for value in spec.values:
        value = axis_value(spec, value)
        cfg = spec.config_at(value)
        for i in range(spec.seeds):
            cells.append((spec.algorithm, spec.axis, value, cfg.with_seed(spec.base.seed + i)))

    logger.info("Sweep %s over %s=%s with %d seeds", spec.algorithm, spec.axis, list(spec.values), spec.seeds)
    rows = sorted(SweepRunner(workers).map(run_cell, cells), key=lambda r: (r.value, r.seed))
    failed = sum(1 for r in rows if r.status != "ok")
    if failed:
        logger.warning("%d of %d sweep cells failed", failed, len(rows))

    aggregates = tuple(
        _aggregate(value, [r for r in rows if r.value == value])
        for value in (axis_value(spec, v) for v in spec.values)
    )
    return SweepTable(spec=spec, rows=tuple(rows), aggregates=aggregates)
