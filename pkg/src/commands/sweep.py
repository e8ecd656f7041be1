from __future__ import annotations

import argparse
import logging
from pathlib import Path

from ..harness.report import emit, json_lines, render_csv
from ..harness.sweep import run_sweep

from .base import CommandBase, CommandContext, add_output_arguments

logger = logging.getLogger(__name__)


class SweepCommand(CommandBase):
    name = "sweep"
    help = "Run a SweepSpec document: one row per (axis value, seed) plus mean and stderr rows"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("spec", type=Path, help="SweepSpec JSON document")
        parser.add_argument("--seed", type=int, default=None, help="override base.seed")
        parser.add_argument("--engine", default=None, help="override base.engine")
        parser.add_argument("--workers", type=int, default=None, help="worker processes (default: physical cores)")
        add_output_arguments(parser)

    def run(self, args: argparse.Namespace, context: CommandContext) -> int:
        spec = context.config_manager.load_sweep(args.spec, {"seed": args.seed, "engine": args.engine})
        table = run_sweep(spec, workers=args.workers)
        emit(table.to_csv(), args.out)
        if args.json_out is not None:
            emit(json_lines(
                {"value": agg.value, "mean": agg.mean, "stderr": agg.stderr, "runs": agg.runs}
                for agg in table.aggregates
            ), args.json_out)
        failed = [row for row in table.rows if row.status != "ok"]
        return 1 if failed else 0


class ExamplesCommand(CommandBase):
    name = "examples"
    help = "List the example documents shipped under config/examples"

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--out", type=Path, default=None)

    def run(self, args: argparse.Namespace, context: CommandContext) -> int:
        examples = context.config_manager.list_examples()
        if not examples:
            logger.warning("No example documents found")
        rows = [(ex.name, ex.description, ex.command) for ex in examples]
        emit(render_csv(("name", "description", "command"), rows), args.out)
        return 0
