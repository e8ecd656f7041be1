from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..config.models import RunConfig
from ..core.errors import ComplianceViolation
from ..core.rng import round_rng
from ..core.types import DataItem, MeanEstRound, RunResult, SampleState, squared_distance
from ..data.distributions import DistributionSpec, draw_batch
from ..recency.compliance import ComplianceReport, TranscriptEntry, check_compliance, transcript_from_states
from ..subset.registry import EngineRegistry, default_registry

logger = logging.getLogger(__name__)

BatchHook = Callable[[int, list[DataItem]], list[DataItem]]


class BatchedAlgorithm(ABC):
    """Subsampling algorithm in the batched model: S_t must be a subset of M_t."""

    name: str = ""

    @abstractmethod
    def initialize(self, batch: Sequence[DataItem]) -> SampleState:
        """Round-1 state built from the first batch."""

    @abstractmethod
    def step(self, state: SampleState, batch: Sequence[DataItem], t: int) -> tuple[SampleState, MeanEstRound | None]:
        ...

    @abstractmethod
    def output(self, state: SampleState) -> np.ndarray:
        ...

    def result_fields(self) -> dict:
        """Extra RunResult fields the algorithm reports (k, singular groups, ...)."""
        return {}


class ConfiguredAlgorithm(BatchedAlgorithm):
    task: str = "mean"

    def __init__(self, cfg: RunConfig, registry: EngineRegistry | None = None) -> None:
        self.cfg = cfg.validate(self.task)
        self.registry = registry if registry is not None else default_registry()
        self.distribution: DistributionSpec = cfg.distribution_for(self.task)

    def check_batch(self, batch: Sequence[DataItem]) -> None:
        if len(batch) != self.cfg.m:
            raise ValueError(f"{self.name} expects batches of m={self.cfg.m} items, got {len(batch)}")


@dataclass
class RunTrace:
    result: RunResult
    final_state: SampleState
    rounds: list[MeanEstRound] = field(default_factory=list)
    transcript: list[TranscriptEntry] = field(default_factory=list)


def engines_used(rounds: Sequence[MeanEstRound], default: str) -> str:
    names = list(dict.fromkeys(r.engine for r in rounds))
    return "+".join(names) if names else default


def execute_batched(
    algorithm: BatchedAlgorithm,
    cfg: RunConfig,
    distribution: DistributionSpec | None = None,
    check: bool = False,
    batch_hook: BatchHook | None = None,
) -> RunTrace:
    """Drive ``algorithm`` through T batched rounds.

    Round t draws its batch from ``round_rng(cfg.seed, t)``. ``batch_hook`` may
    rewrite a drawn batch before the algorithm sees it. With ``check`` the
    compliance report is attached to the result and a violation raises.
    """
    if distribution is None:
        distribution = getattr(algorithm, "distribution", None)
    if distribution is None:
        distribution = cfg.distribution_for("mean")
    logger.info("Run %s: seed=%d T=%d m=%d d=%d", algorithm.name, cfg.seed, cfg.T, cfg.m, cfg.d)

    states: list[SampleState] = []
    rounds: list[MeanEstRound] = []
    state: SampleState | None = None
    for t in range(1, cfg.T + 1):
        batch = draw_batch(distribution, cfg.m, round_rng(cfg.seed, t), t)
        if batch_hook is not None:
            batch = batch_hook(t, batch)
        if state is None:
            state = algorithm.initialize(batch)
        else:
            state, record = algorithm.step(state, batch, t)
            if record is not None:
                rounds.append(record)
                logger.debug(
                    "Round %d: encoding error %.3g via %s%s",
                    t, record.encoding_error, record.engine, " (fallback)" if record.fallback else "",
                )
        states.append(state)

    transcript = transcript_from_states(states)
    report: ComplianceReport = check_compliance(transcript, cfg.m, "batched")
    if check and not report.ok:
        raise ComplianceViolation(f"{algorithm.name} retained items outside the current batch", report)

    estimate = np.asarray(algorithm.output(state), dtype=float)
    theta = distribution.theta
    fields = {
        "engine": engines_used(rounds, cfg.engine),
        "fallback_rounds": sum(1 for r in rounds if r.fallback),
        **algorithm.result_fields(),
    }
    result = RunResult(
        algorithm=algorithm.name,
        seed=cfg.seed,
        T=cfg.T,
        m=cfg.m,
        d=cfg.d,
        estimate=tuple(float(v) for v in estimate),
        squared_error=squared_distance(estimate, theta),
        per_round_encoding_error=tuple(r.encoding_error ** 2 for r in rounds),
        compliance_ok=report.ok,
        compliance=report if check else None,
        **fields,
    )
    logger.info("Run %s seed=%d finished: squared error %.6g", algorithm.name, cfg.seed, result.squared_error)
    return RunTrace(result=result, final_state=state, rounds=rounds, transcript=transcript)
