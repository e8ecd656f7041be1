from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..algorithms.mean_estimation import alg1_step
from ..config.models import EtaSchedule, RunConfig
from ..core.types import DataItem, SampleState
from ..data.distributions import PointMass
from ..subset.exact import EXACT_BUDGET, best_subset_exact

logger = logging.getLogger(__name__)

LOWER_BOUND_MAX_D = 8

# Worked example: m = 3, b = 1, η = 1/2, S_1 = {0}.
DP_FIRST_STATE = (0.0,)
DP_BATCH = (0.0, 10.0, 10.0)
DP_NEIGHBOUR = (0.0, 0.0, 10.0)


def lower_bound_threshold(d: int, epsilon: float) -> float:
    """Memory below which no scheme reaches squared error ε with probability 1/3.

    d·ln(1/ε) / (ln d + ln ln(1/ε)); needs d >= 2 and ε < 1/e so the
    denominator is positive.
    """
    if d < 2:
        raise ValueError("the threshold is defined for d >= 2")
    if not 0 < epsilon < math.exp(-1):
        raise ValueError("the threshold is defined for 0 < epsilon < 1/e")
    log_inv = math.log(1 / epsilon)
    return d * log_inv / (math.log(d) + math.log(log_inv))


def lower_bound_probe(d: int, m: int, epsilon: float, trials: int, rng: np.random.Generator) -> float:
    """Failure rate of the genie-aided subset scheme.

    θ = 0 is revealed, M ~ N(0, I_d)^m, and the best nonempty subset average
    is taken; a trial fails when its squared distance to θ still exceeds ε.
    """
    if not 1 <= m <= EXACT_BUDGET:
        raise ValueError(f"m must lie in [1, {EXACT_BUDGET}], got {m}")
    if not 1 <= d <= LOWER_BOUND_MAX_D:
        raise ValueError(f"d must lie in [1, {LOWER_BOUND_MAX_D}], got {d}")
    if epsilon <= 0 or trials < 1:
        raise ValueError("epsilon must be positive and trials at least 1")
    theta = np.zeros(d)
    failures = 0
    for _ in range(trials):
        batch = rng.standard_normal((m, d))
        if best_subset_exact(batch, theta).distance ** 2 > epsilon:
            failures += 1
    probability = failures / trials
    logger.info("Lower-bound probe d=%d m=%d epsilon=%g: failure %.4f", d, m, epsilon, probability)
    return probability


@dataclass(frozen=True)
class PartitionCase:
    batch: tuple[float, ...]
    held_out: int
    target: float
    retained: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "batch": list(self.batch),
            "R_index": self.held_out + 1,
            "target": self.target,
            "retained": list(self.retained),
        }


@dataclass(frozen=True)
class DpDemoReport:
    cases: tuple[PartitionCase, ...]
    image: frozenset[tuple[float, ...]]
    neighbour_image: frozenset[tuple[float, ...]]

    @property
    def disjoint(self) -> bool:
        return not (self.image & self.neighbour_image)

    def to_dict(self) -> dict:
        return {
            "cases": [case.to_dict() for case in self.cases],
            "image": sorted(list(s) for s in self.image),
            "neighbour_image": sorted(list(s) for s in self.neighbour_image),
            "disjoint": self.disjoint,
        }


def _partition_cases(values: tuple[float, ...], cfg: RunConfig) -> list[PartitionCase]:
    state = SampleState(items=(DataItem(values=DP_FIRST_STATE, arrival_round=1),))
    batch = [DataItem(values=(v,), arrival_round=2, offset=j) for j, v in enumerate(values)]
    cases = []
    for held_out in range(len(batch)):
        ordered = [batch[held_out]] + [it for j, it in enumerate(batch) if j != held_out]
        new_state, record = alg1_step(state, ordered, 2, cfg)
        cases.append(PartitionCase(
            batch=values,
            held_out=held_out,
            target=float(record.z_t[0]),
            retained=tuple(sorted(it.values[0] for it in new_state.items)),
        ))
    return cases


def dp_demo() -> DpDemoReport:
    """Round-2 images of two batches that differ in one item.

    Every choice of the held-out item R_2 is enumerated for M_2 = (0, 10, 10)
    and M_2' = (0, 0, 10). The reachable retained states never overlap, so
    the state reveals which batch arrived even though the differing item is
    never kept.
    """
    cfg = RunConfig(
        m=3,
        T=2,
        d=1,
        b=1,
        eta_schedule=EtaSchedule("constant", 0.5),
        engine="exact",
        distribution=PointMass(theta=np.zeros(1)),
    )
    first = _partition_cases(DP_BATCH, cfg)
    second = _partition_cases(DP_NEIGHBOUR, cfg)
    report = DpDemoReport(
        cases=tuple(first + second),
        image=frozenset(case.retained for case in first),
        neighbour_image=frozenset(case.retained for case in second),
    )
    if not report.disjoint:
        raise AssertionError(f"image sets overlap: {sorted(report.image & report.neighbour_image)}")
    return report
