from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..config.models import EtaSchedule, RunConfig
from ..core.types import DataItem, MeanEstRound, RunResult, SampleState, items_matrix
from ..data.distributions import GaussianMean
from ..subset.base import Norm, exact_distance
from ..subset.registry import EngineRegistry, default_registry

from .base import ConfiguredAlgorithm, execute_batched

logger = logging.getLogger(__name__)


def column_average(matrix: np.ndarray) -> np.ndarray:
    """Average of the rows; scalar instances pass an (n, 1) slice so d=1 runs agree bit for bit."""
    return matrix.mean(axis=0)


def alg1_step(
    state: SampleState,
    batch: Sequence[DataItem],
    t: int,
    cfg: RunConfig,
    rng: np.random.Generator | None = None,
    registry: EngineRegistry | None = None,
) -> tuple[SampleState, MeanEstRound]:
    """One round of simple subsampling.

    R_t is the first b items of the batch, N_t the rest. The new state is the
    subset of N_t whose average is closest to z_t = s + η_t(avg(R_t) − s).
    ``rng`` is unused: the step is deterministic given the batch.
    """
    if state.is_empty():
        raise ValueError("alg1_step needs the state of the previous round; round 1 sets S_1 = M_1")
    if len(batch) != cfg.m:
        raise ValueError(f"batch holds {len(batch)} items, expected m={cfg.m}")
    registry = registry if registry is not None else default_registry()

    b = cfg.split
    rest = list(batch[b:])
    s_prev = column_average(state.matrix())
    y_t = column_average(items_matrix(batch[:b]))
    eta = cfg.eta_schedule.at(t)
    z_t = s_prev + eta * (y_t - s_prev)

    choice, engine, fallback = registry.search(cfg.engine, items_matrix(rest), z_t, Norm.l2(), cfg.allow_fallback)
    new_state = SampleState(items=tuple(rest[p] for p in choice.positions))
    return new_state, MeanEstRound(
        t=t,
        s_prev=s_prev,
        y_t=y_t,
        z_t=z_t,
        eta=eta,
        chosen=(choice,),
        encoding_error=choice.distance,
        engine=engine,
        fallback=fallback,
    )


class SimpleSubsampling(ConfiguredAlgorithm):
    name = "alg1"

    def initialize(self, batch: Sequence[DataItem]) -> SampleState:
        self.check_batch(batch)
        return SampleState(items=tuple(batch))

    def step(self, state: SampleState, batch: Sequence[DataItem], t: int) -> tuple[SampleState, MeanEstRound]:
        return alg1_step(state, batch, t, self.cfg, registry=self.registry)

    def output(self, state: SampleState) -> np.ndarray:
        return column_average(state.matrix())


class PerCoordinateSubsampling(ConfiguredAlgorithm):
    """d scalar instances of simple subsampling, one per coordinate.

    Instance i owns the i-th block of m/d items of every batch and of the
    state; it reads coordinate i only but retains whole items.
    """

    name = "improved"
    task = "improved"

    def __init__(self, cfg: RunConfig, registry: EngineRegistry | None = None) -> None:
        super().__init__(cfg, registry)
        self.block = cfg.m // cfg.d
        self.block_split = cfg.split // cfg.d

    def _blocks(self, batch: Sequence[DataItem]) -> list[list[DataItem]]:
        return [list(batch[i * self.block:(i + 1) * self.block]) for i in range(self.cfg.d)]

    @staticmethod
    def _assemble(segments: Sequence[Sequence[DataItem]]) -> SampleState:
        items: list[DataItem] = []
        bounds: list[tuple[int, int]] = []
        for segment in segments:
            bounds.append((len(items), len(items) + len(segment)))
            items.extend(segment)
        return SampleState(items=tuple(items), segments=tuple(bounds))

    def initialize(self, batch: Sequence[DataItem]) -> SampleState:
        self.check_batch(batch)
        return self._assemble(self._blocks(batch))

    def coordinate_average(self, items: Sequence[DataItem], i: int) -> np.ndarray:
        return column_average(items_matrix(items)[:, [i]])

    def step(self, state: SampleState, batch: Sequence[DataItem], t: int) -> tuple[SampleState, MeanEstRound]:
        self.check_batch(batch)
        eta = self.cfg.eta_schedule.at(t)
        s_prev, y_t, z_t, achieved = [], [], [], []
        choices = []
        segments = []
        engines: list[str] = []
        fallback = False
        for i, block in enumerate(self._blocks(batch)):
            rest = block[self.block_split:]
            s_i = self.coordinate_average(state.segment(i), i)
            y_i = self.coordinate_average(block[:self.block_split], i)
            z_i = s_i + eta * (y_i - s_i)
            choice, engine, used_fallback = self.registry.search(
                self.cfg.engine, items_matrix(rest)[:, [i]], z_i, Norm.l2(), self.cfg.allow_fallback
            )
            s_prev.append(s_i[0])
            y_t.append(y_i[0])
            z_t.append(z_i[0])
            achieved.append(choice.achieved[0])
            choices.append(choice)
            segments.append([rest[p] for p in choice.positions])
            engines.append(engine)
            fallback = fallback or used_fallback

        z_vec = np.array(z_t)
        return self._assemble(segments), MeanEstRound(
            t=t,
            s_prev=np.array(s_prev),
            y_t=np.array(y_t),
            z_t=z_vec,
            eta=eta,
            chosen=tuple(choices),
            encoding_error=exact_distance(achieved, z_vec, Norm.l2()),
            engine="+".join(dict.fromkeys(engines)),
            fallback=fallback,
        )

    def output(self, state: SampleState) -> np.ndarray:
        return np.array([self.coordinate_average(state.segment(i), i)[0] for i in range(self.cfg.d)])


class KeepAll(ConfiguredAlgorithm):
    """Baseline retaining the whole batch every round."""

    name = "baseline_mean"

    def initialize(self, batch: Sequence[DataItem]) -> SampleState:
        self.check_batch(batch)
        return SampleState(items=tuple(batch))

    def step(self, state: SampleState, batch: Sequence[DataItem], t: int) -> tuple[SampleState, None]:
        return self.initialize(batch), None

    def output(self, state: SampleState) -> np.ndarray:
        return column_average(state.matrix())


def run_alg1(cfg: RunConfig, check_compliance: bool = False, registry: EngineRegistry | None = None) -> RunResult:
    return execute_batched(SimpleSubsampling(cfg, registry), cfg, check=check_compliance).result


def run_improved(cfg: RunConfig, check_compliance: bool = False, registry: EngineRegistry | None = None) -> RunResult:
    return execute_batched(PerCoordinateSubsampling(cfg, registry), cfg, check=check_compliance).result


def baseline_run(cfg: RunConfig, check_compliance: bool = False) -> RunResult:
    return execute_batched(KeepAll(cfg), cfg, check=check_compliance).result


@dataclass(frozen=True)
class OutlierPersistence:
    """avg(S_t) per round with and without an outlier in the first batch."""

    outlier: float
    rounds: tuple[int, ...]
    with_outlier: tuple[float, ...]
    without_outlier: tuple[float, ...]
    outlier_retained_after: int

    @property
    def gaps(self) -> tuple[float, ...]:
        return tuple(a - b for a, b in zip(self.with_outlier, self.without_outlier))

    def to_dict(self) -> dict:
        return {
            "outlier": self.outlier,
            "rounds": list(self.rounds),
            "with_outlier": list(self.with_outlier),
            "without_outlier": list(self.without_outlier),
            "gap": list(self.gaps),
            "outlier_retained_after": self.outlier_retained_after,
        }


def outlier_persistence(m: int = 12, rounds: int = 20, outlier: float = 50.0, seed: int = 0) -> OutlierPersistence:
    """Show that a point removed from the state still steers later averages.

    The first item of batch 1 is replaced by ``outlier``. It leaves the state
    at round 2, yet avg(S_t) keeps differing from the clean run because every
    later target is anchored on the previous average.
    """
    cfg = RunConfig(
        m=m,
        T=rounds,
        d=1,
        seed=seed,
        eta_schedule=EtaSchedule("inverse_t"),
        distribution=GaussianMean(theta=np.zeros(1), cov=np.eye(1)),
    )

    def plant(t: int, batch: list[DataItem]) -> list[DataItem]:
        if t == 1:
            batch = [replace(batch[0], values=(outlier,))] + batch[1:]
        return batch

    dirty = execute_batched(SimpleSubsampling(cfg), cfg, batch_hook=plant)
    clean = execute_batched(SimpleSubsampling(cfg), cfg)

    def averages(trace) -> tuple[float, ...]:
        return tuple(float(column_average(items_matrix(entry.items))[0]) for entry in trace.transcript)

    retained = [
        entry.round for entry in dirty.transcript
        if any(it.arrival_round == 1 and it.offset == 0 for it in entry.items)
    ]
    report = OutlierPersistence(
        outlier=outlier,
        rounds=tuple(entry.round for entry in dirty.transcript),
        with_outlier=averages(dirty),
        without_outlier=averages(clean),
        outlier_retained_after=max(retained, default=0),
    )
    logger.info(
        "Outlier %.3g dropped after round %d; final gap %.3g",
        outlier, report.outlier_retained_after, report.gaps[-1],
    )
    return report
