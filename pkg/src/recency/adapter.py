from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..algorithms.base import BatchedAlgorithm
from ..config.models import RunConfig
from ..core.errors import AdapterError, ComplianceViolation
from ..core.rng import round_rng
from ..core.types import DataItem, MeanEstRound, SampleState, as_batch_item, as_stream_item
from ..data.distributions import DistributionSpec, draw_batch
from .compliance import ComplianceReport, TranscriptEntry, check_compliance

logger = logging.getLogger(__name__)


class StreamingAlgorithm(ABC):
    """Subsampling algorithm that sees one item per round."""

    name: str = ""

    def initial_state(self) -> SampleState:
        return SampleState()

    @abstractmethod
    def step(self, state: SampleState, item: DataItem, t: int) -> SampleState:
        ...

    @abstractmethod
    def output(self, state: SampleState, t: int) -> np.ndarray:
        ...


def _restamp(state: SampleState, m: int, to_stream: bool) -> SampleState:
    convert = as_stream_item if to_stream else as_batch_item
    return SampleState(items=tuple(convert(it, m) for it in state.items), segments=state.segments)


class BatchToStream(StreamingAlgorithm):
    """Run a batched algorithm on a stream with 2m-recency.

    The state is the batched state followed by the items of the batch being
    collected. Every m-th round the pending items form a batch and the
    batched step replaces the whole state.
    """

    def __init__(self, batched: BatchedAlgorithm, m: int) -> None:
        if m < 1:
            raise ValueError(f"m must be positive, got {m}")
        self.batched = batched
        self.m = m
        self.name = f"stream({batched.name})"

    def _split(self, state: SampleState, pending: int) -> tuple[SampleState, tuple[DataItem, ...]]:
        cut = len(state.items) - pending
        return SampleState(items=state.items[:cut], segments=state.segments), state.items[cut:]

    def step(self, state: SampleState, item: DataItem, t: int) -> SampleState:
        base, pending = self._split(state, (t - 1) % self.m)
        pending = pending + (item,)
        if t % self.m:
            return SampleState(items=base.items + pending, segments=base.segments)

        k = t // self.m
        batch = [as_batch_item(it, self.m) for it in pending]
        if k == 1:
            new_base = self.batched.initialize(batch)
        else:
            new_base, _ = self.batched.step(_restamp(base, self.m, to_stream=False), batch, k)
        extra = Counter(new_base.items) - Counter(batch)
        if extra:
            raise AdapterError(
                f"{self.batched.name} kept {sum(extra.values())} item(s) outside batch {k}"
            )
        return _restamp(new_base, self.m, to_stream=True)

    def output(self, state: SampleState, t: int) -> np.ndarray:
        """Output of the last completed batch; trailing pending items are ignored."""
        if t < self.m:
            raise AdapterError(f"no batch has completed by round {t}")
        base, _ = self._split(state, t % self.m)
        return self.batched.output(_restamp(base, self.m, to_stream=False))


class StreamToBatch(BatchedAlgorithm):
    """Run an m-recent streaming algorithm in the batched model.

    Each batch is fed item by item through the streaming update; the state
    after the last item becomes the batch state. The streaming states are
    audited against ``recency`` (default m) as they are produced.
    """

    def __init__(self, streaming: StreamingAlgorithm, m: int, recency: int | None = None) -> None:
        if m < 1:
            raise ValueError(f"m must be positive, got {m}")
        self.streaming = streaming
        self.m = m
        self.recency = m if recency is None else recency
        self.name = f"batch({streaming.name})"
        self.transcript: list[TranscriptEntry] = []
        self._rounds = 0

    def _feed(self, state: SampleState, batch: Sequence[DataItem], k: int) -> SampleState:
        if len(batch) != self.m:
            raise ValueError(f"expected a batch of m={self.m} items, got {len(batch)}")
        stream_state = _restamp(state, self.m, to_stream=True)
        for item in batch:
            stream_item = as_stream_item(item, self.m)
            t = stream_item.arrival_round
            stream_state = self.streaming.step(stream_state, stream_item, t)
            entry = TranscriptEntry.from_state(t, stream_state)
            self.transcript.append(entry)
            report = check_compliance([entry], self.recency, "streaming")
            if not report.ok:
                full = check_compliance(self.transcript, self.recency, "streaming")
                raise ComplianceViolation(
                    f"{self.streaming.name} broke {self.recency}-recency at stream round {t}", full
                )
        self._rounds = k
        return _restamp(stream_state, self.m, to_stream=False)

    def initialize(self, batch: Sequence[DataItem]) -> SampleState:
        self.transcript = []
        return self._feed(self.streaming.initial_state(), batch, 1)

    def step(self, state: SampleState, batch: Sequence[DataItem], t: int) -> tuple[SampleState, MeanEstRound | None]:
        return self._feed(state, batch, t), None

    def output(self, state: SampleState) -> np.ndarray:
        return self.streaming.output(_restamp(state, self.m, to_stream=True), self._rounds * self.m)

    def report(self) -> ComplianceReport:
        return check_compliance(self.transcript, self.recency, "streaming")


def batch_to_stream(batched: BatchedAlgorithm, m: int) -> BatchToStream:
    return BatchToStream(batched, m)


def stream_to_batch(streaming: StreamingAlgorithm, m: int, recency: int | None = None) -> StreamToBatch:
    return StreamToBatch(streaming, m, recency)


@dataclass
class StreamTrace:
    final_state: SampleState
    estimate: np.ndarray
    rounds: int
    transcript: list[TranscriptEntry] = field(default_factory=list)
    report: ComplianceReport | None = None


def run_streaming(
    streaming: StreamingAlgorithm,
    cfg: RunConfig,
    distribution: DistributionSpec,
    rounds: int | None = None,
    window: int | None = None,
) -> StreamTrace:
    """Feed ``rounds`` stream items (default T·m) to ``streaming``.

    Items come from the same per-batch draws as the batched driver, so batch k
    of the stream equals round k of a batched run with the same seed. The
    transcript is audited against ``window`` (default m).
    """
    rounds = cfg.T * cfg.m if rounds is None else rounds
    window = cfg.m if window is None else window
    state = streaming.initial_state()
    transcript: list[TranscriptEntry] = []
    batch: list[DataItem] = []
    for t in range(1, rounds + 1):
        k, offset = divmod(t - 1, cfg.m)
        if offset == 0:
            batch = draw_batch(distribution, cfg.m, round_rng(cfg.seed, k + 1), k + 1)
        state = streaming.step(state, as_stream_item(batch[offset], cfg.m), t)
        transcript.append(TranscriptEntry.from_state(t, state))
    report = check_compliance(transcript, window, "streaming")
    logger.info("Streaming run %s: %d rounds, compliance %s", streaming.name, rounds, "ok" if report.ok else "violated")
    return StreamTrace(
        final_state=state,
        estimate=np.asarray(streaming.output(state, rounds), dtype=float),
        rounds=rounds,
        transcript=transcript,
        report=report,
    )
