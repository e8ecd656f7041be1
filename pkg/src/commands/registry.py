from __future__ import annotations

import argparse
import logging

from ..core.errors import ComplianceViolation, ConfigError, RetentionLabError

from .base import CommandBase, CommandContext

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_CONFIG_ERROR = 2


class CommandRegistry:
    def __init__(self) -> None:
        self._commands: dict[str, CommandBase] = {}

    def register(self, command: CommandBase) -> None:
        self._commands[command.name] = command
        logger.debug("Registered command: %s", command.name)

    def install(self, subparsers: argparse._SubParsersAction) -> None:
        for command in self._commands.values():
            parser = subparsers.add_parser(command.name, help=command.help, description=command.help)
            command.add_arguments(parser)

    def execute(self, name: str, args: argparse.Namespace, context: CommandContext) -> int:
        """Run a command and map failures onto exit codes."""
        command = self._commands.get(name)
        if command is None:
            logger.error("Unknown command: %s", name)
            return EXIT_CONFIG_ERROR
        try:
            return command.run(args, context)
        except ConfigError as exc:
            logger.error("Invalid configuration: %s", exc)
            return EXIT_CONFIG_ERROR
        except ComplianceViolation as exc:
            report = exc.report
            logger.error(
                "%s (%d violation(s), max staleness %d)", exc, len(report.violations), report.max_staleness
            )
            return EXIT_RUN_FAILURE
        except RetentionLabError as exc:
            logger.error("%s failed: %s", name, exc)
            return EXIT_RUN_FAILURE
        except Exception:
            logger.exception("Command %s failed", name)
            return EXIT_RUN_FAILURE
