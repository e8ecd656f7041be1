from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from ..recency.compliance import ComplianceReport


class RetentionLabError(Exception):
    """Base class for every error raised by the library."""


class ConfigError(RetentionLabError, ValueError):
    """A run, sweep or distribution document is invalid."""


class DistributionError(ConfigError):
    """Distribution parameters the generators refuse to sample from."""


class EngineBudgetError(RetentionLabError):
    """Candidate list is empty or larger than the engine can enumerate."""


class SingularGroupError(RetentionLabError):
    def __init__(self, message: str, condition_number: float = float("inf")) -> None:
        super().__init__(message)
        self.condition_number = condition_number


class ComplianceViolation(RetentionLabError):
    def __init__(self, message: str, report: ComplianceReport) -> None:
        super().__init__(message)
        self.report = report


class AdapterError(RetentionLabError):
    """A wrapped batched algorithm kept items from outside its current batch."""


class InvalidQueryError(RetentionLabError, ValueError):
    """Prediction query outside the unit ball."""


def reject_unknown_keys(data: dict, allowed: set[str] | frozenset[str], where: str) -> None:
    unknown = sorted(set(data) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")
