from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from ..core.types import DataItem, SampleState

logger = logging.getLogger(__name__)

MODES = ("streaming", "batched")


@dataclass(frozen=True)
class TranscriptEntry:
    """State S_t retained at the end of round ``round``."""

    round: int
    items: tuple[DataItem, ...]

    @classmethod
    def from_state(cls, round_index: int, state: SampleState) -> TranscriptEntry:
        return cls(round=round_index, items=tuple(state.items))


def transcript_from_states(states: Iterable[SampleState], first_round: int = 1) -> list[TranscriptEntry]:
    return [TranscriptEntry.from_state(first_round + i, state) for i, state in enumerate(states)]


@dataclass(frozen=True)
class ComplianceReport:
    violations: tuple[tuple[int, int], ...] = ()
    max_staleness: int = 0
    ok: bool = True
    mode: str = "batched"
    window: int = 1
    rounds_checked: int = 0

    def to_dict(self) -> dict:
        return {
            "violations": [list(v) for v in self.violations],
            "max_staleness": self.max_staleness,
            "ok": self.ok,
            "mode": self.mode,
            "window": self.window,
            "rounds_checked": self.rounds_checked,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ComplianceReport:
        return cls(
            violations=tuple((int(r), int(a)) for r, a in data.get("violations", [])),
            max_staleness=data.get("max_staleness", 0),
            ok=data.get("ok", True),
            mode=data.get("mode", "batched"),
            window=data.get("window", 1),
            rounds_checked=data.get("rounds_checked", 0),
        )


def retention_deadline(item: DataItem, m: int, mode: str) -> int:
    """Last round in which ``item`` may still be retained.

    Streaming stamps may stay for m rounds, batched stamps only for the round
    they arrived in. A deletion request can only move the deadline earlier.
    """
    default = item.arrival_round + m - 1 if mode == "streaming" else item.arrival_round
    if item.deadline_round is None:
        return default
    return min(default, item.deadline_round)


def check_compliance(transcript: Sequence[TranscriptEntry], m: int, mode: str = "batched") -> ComplianceReport:
    """Audit every logged state against the m-recency contract.

    A violation ``(round, arrival)`` is reported for each retained item that is
    past its deadline, or that claims to arrive after the round it is held in.
    ``max_staleness`` is round − oldest arrival for streaming transcripts and
    the number of batches spanned for batched ones.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")

    violations: list[tuple[int, int]] = []
    max_staleness = 0
    for entry in transcript:
        if not entry.items:
            continue
        oldest = min(item.arrival_round for item in entry.items)
        staleness = entry.round - oldest if mode == "streaming" else entry.round - oldest + 1
        max_staleness = max(max_staleness, staleness)
        for item in entry.items:
            if item.arrival_round > entry.round or entry.round > retention_deadline(item, m, mode):
                violations.append((entry.round, item.arrival_round))

    report = ComplianceReport(
        violations=tuple(violations),
        max_staleness=max_staleness,
        ok=not violations,
        mode=mode,
        window=m,
        rounds_checked=len(transcript),
    )
    if report.ok:
        logger.debug("Compliance ok over %d rounds (%s, window %d)", len(transcript), mode, m)
    else:
        logger.warning("Compliance check found %d violation(s), first at round %d", len(violations), violations[0][0])
    return report
