from __future__ import annotations

import argparse
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..config.manager import ConfigManager
from ..config.models import RunConfig
from ..core.errors import ConfigError
from ..subset.registry import EngineRegistry, default_registry


@dataclass
class CommandContext:
    """Shared services handed to every command."""

    config_manager: ConfigManager = field(default_factory=ConfigManager)
    engines: EngineRegistry = field(default_factory=default_registry)


class CommandBase(ABC):
    name: str = ""
    help: str = ""

    @abstractmethod
    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        ...

    @abstractmethod
    def run(self, args: argparse.Namespace, context: CommandContext) -> int:
        """Execute the command and return its exit code."""
        ...


def add_output_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--out", type=Path, default=None, help="write the CSV table here instead of stdout")
    parser.add_argument("--json-out", type=Path, default=None, help="write JSON records here")


def add_run_arguments(parser: argparse.ArgumentParser, group_size: bool = False) -> None:
    """Flags shared by every subcommand that drives a batched run."""
    parser.add_argument("--config", type=Path, default=None, help="RunConfig JSON document")
    parser.add_argument("--dist", type=Path, default=None, help="distribution JSON document")
    parser.add_argument("--m", type=int, default=None, help="batch size (items retained per round)")
    parser.add_argument("--T", type=int, default=None, help="number of rounds")
    parser.add_argument("--d", type=int, default=None, help="dimension")
    parser.add_argument("--b", type=int, default=None, help="items held out for the target (default m//2)")
    if group_size:
        parser.add_argument("--k", type=int, default=None, help="items per group")
    parser.add_argument("--seed", type=int, default=None, help="first seed")
    parser.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")
    parser.add_argument("--engine", default=None, help="subset search engine: exact, mitm or greedy")
    parser.add_argument(
        "--allow-fallback", action="store_true", default=None,
        help="fall back to the chunked or greedy engine when the batch exceeds the engine budget",
    )
    parser.add_argument(
        "--check-compliance", action="store_true",
        help="attach the m-recency report to every result and fail on a violation",
    )
    add_output_arguments(parser)


def run_overrides(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "m": args.m,
        "T": args.T,
        "d": args.d,
        "b": args.b,
        "k": getattr(args, "k", None),
        "seed": args.seed,
        "engine": args.engine,
        "allow_fallback": args.allow_fallback,
    }


def load_run_config(args: argparse.Namespace, context: CommandContext) -> RunConfig:
    return context.config_manager.load_run(args.config, args.dist, run_overrides(args))


def seed_configs(cfg: RunConfig, seeds: int) -> list[RunConfig]:
    if seeds < 1:
        raise ConfigError(f"--seeds must be at least 1, got {seeds}")
    return [cfg.with_seed(cfg.seed + i) for i in range(seeds)]
