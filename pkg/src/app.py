from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .commands.base import CommandContext
from .commands.probes import probe_commands
from .commands.registry import EXIT_CONFIG_ERROR, CommandRegistry
from .commands.runs import mean_commands, regression_commands
from .commands.sweep import ExamplesCommand, SweepCommand
from .config.manager import ConfigManager
from .subset.registry import default_registry
from .version import APP_VERSION

logger = logging.getLogger(__name__)

_LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


class RetentionLabApp:
    def __init__(self, argv: list[str]) -> None:
        # Commands
        self._command_registry = CommandRegistry()
        self._register_commands()

        self._parser = self._build_parser()
        self._args = self._parser.parse_args(argv[1:])

        self._log_handlers: list[logging.Handler] = []
        self._setup_logging()

        # Config and engines
        self._context = CommandContext(config_manager=ConfigManager(), engines=default_registry())

    def _register_commands(self) -> None:
        for command in mean_commands() + regression_commands() + probe_commands():
            self._command_registry.register(command)
        self._command_registry.register(SweepCommand())
        self._command_registry.register(ExamplesCommand())

    def _build_parser(self) -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(
            prog="retention-lab",
            description="Online estimation under m-recency data retention",
        )
        parser.add_argument("--version", action="version", version=f"%(prog)s {APP_VERSION}")
        parser.add_argument("-v", "--verbose", action="store_true", help="log per-round detail")
        parser.add_argument("-q", "--quiet", action="store_true", help="log warnings and errors only")
        parser.add_argument("--log-file", type=Path, default=None, help="also write the log to this file")
        subparsers = parser.add_subparsers(dest="command", metavar="<subcommand>")
        self._command_registry.install(subparsers)
        return parser

    def _setup_logging(self) -> None:
        if self._args.verbose:
            level = logging.DEBUG
        elif self._args.quiet:
            level = logging.WARNING
        else:
            level = logging.INFO

        # stdout carries CSV and JSON, so the console log goes to stderr
        handlers: list[logging.Handler] = [logging.StreamHandler(sys.stderr)]

        log_file = self._args.log_file or os.environ.get("RETENTION_LAB_LOG")
        if log_file:
            path = Path(log_file)
            path.parent.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.FileHandler(path, encoding="utf-8"))

        for handler in handlers:
            handler.setFormatter(logging.Formatter(_LOG_FORMAT))
        logging.basicConfig(level=level, format=_LOG_FORMAT, handlers=handlers, force=True)
        self._log_handlers = handlers

    def exec(self) -> int:
        name = self._args.command
        if name is None:
            self._parser.print_help(sys.stderr)
            return EXIT_CONFIG_ERROR
        logger.debug("Running %s", name)
        return self._command_registry.execute(name, self._args, self._context)

    def cleanup(self) -> None:
        logger.debug("Shutting down...")
        for handler in self._log_handlers:
            handler.flush()
            if isinstance(handler, logging.FileHandler):
                handler.close()
        self._log_handlers = []
