from __future__ import annotations

import argparse
import logging
from typing import Callable, Sequence

from ..algorithms.mean_estimation import baseline_run, run_alg1, run_improved
from ..algorithms.regression import ols_baseline, run_alg2
from ..config.models import RunConfig
from ..core.types import RunResult
from ..harness.report import (
    MEAN_COLUMNS,
    REGRESSION_COLUMNS,
    emit,
    mean_rows,
    regression_rows,
    render_csv,
    results_json,
)

from .base import CommandBase, CommandContext, add_run_arguments, load_run_config, seed_configs

logger = logging.getLogger(__name__)


class RunCommand(CommandBase):
    """One batched run per seed, written as a CSV table and JSON lines."""

    columns: tuple[str, ...] = MEAN_COLUMNS
    group_size = False

    def __init__(self, name: str, help: str, runner: Callable[..., RunResult], uses_engine: bool = True) -> None:
        self.name = name
        self.help = help
        self._runner = runner
        self.uses_engine = uses_engine

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        add_run_arguments(parser, group_size=self.group_size)

    def rows(self, results: Sequence[RunResult]) -> list[tuple]:
        return mean_rows(results)

    def run_one(self, cfg: RunConfig, args: argparse.Namespace, context: CommandContext) -> RunResult:
        if self.uses_engine:
            return self._runner(cfg, check_compliance=args.check_compliance, registry=context.engines)
        return self._runner(cfg, check_compliance=args.check_compliance)

    def run(self, args: argparse.Namespace, context: CommandContext) -> int:
        cfg = load_run_config(args, context)
        results = [self.run_one(seeded, args, context) for seeded in seed_configs(cfg, args.seeds)]
        emit(render_csv(self.columns, self.rows(results)), args.out)
        if args.json_out is not None:
            emit(results_json(results), args.json_out)
        logger.info("%s finished %d run(s)", self.name, len(results))
        return 0


class RegressionRunCommand(RunCommand):
    columns = REGRESSION_COLUMNS
    group_size = True

    def rows(self, results: Sequence[RunResult]) -> list[tuple]:
        return regression_rows(results)


def mean_commands() -> list[CommandBase]:
    return [
        RunCommand("mean-alg1", "Simple subsampling mean estimation", run_alg1),
        RunCommand("mean-improved", "Per-coordinate subsampling mean estimation", run_improved),
        RunCommand("mean-baseline", "Keep-all baseline: the mean of the latest batch", baseline_run, uses_engine=False),
    ]


def regression_commands() -> list[CommandBase]:
    return [
        RegressionRunCommand("regress-alg2", "Subsampling linear regression", run_alg2),
        RegressionRunCommand("regress-baseline", "Least squares on the latest batch", ols_baseline, uses_engine=False),
    ]
