from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from ..config.models import RunConfig
from ..core.errors import ConfigError, InvalidQueryError, SingularGroupError
from ..core.rng import CALIBRATION_STREAM, seeded_rng
from ..core.types import (
    DataItem,
    GroupedState,
    MeanEstRound,
    RunResult,
    SampleState,
    items_labels,
    items_matrix,
)
from ..data.distributions import Regression, second_moment_estimate
from ..subset.base import Norm, exact_distance
from ..subset.registry import EngineRegistry, default_registry

from .base import ConfiguredAlgorithm, execute_batched

logger = logging.getLogger(__name__)

SINGULAR_CONDITION = 1e12
# Groups solved per vectorized call in the density probe.
_PROBE_CHUNK = 50_000


def _solve_groups(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Least-squares solutions for a stack of groups.

    X has shape (r, k, d) and Y (r, k). Returns the (r, d) solutions, NaN for
    singular groups, and the condition number of each group's XᵀX.
    """
    gram = np.einsum("gki,gkj->gij", X, X)
    with np.errstate(divide="ignore", invalid="ignore"):
        condition = np.linalg.cond(gram)
    singular = ~np.isfinite(condition) | (condition > SINGULAR_CONDITION)

    q, r = np.linalg.qr(X)
    rhs = np.einsum("gkd,gk->gd", q, Y)
    r = np.where(singular[:, None, None], np.eye(X.shape[2]), r)
    solutions = np.linalg.solve(r, rhs[..., None])[..., 0]
    solutions[singular] = np.nan
    return solutions, condition


def group_mles(items: Sequence[DataItem], k: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-group OLS estimates for consecutive groups of k items.

    Returns ``(solutions, condition)``; singular groups hold NaN rows.
    """
    if k < 1 or not items or len(items) % k:
        raise ValueError(f"{len(items)} items do not split into groups of k={k}")
    X = items_matrix(items)
    d = X.shape[1]
    if k < d:
        raise ValueError(f"group size k={k} is below the dimension d={d}")
    r = len(items) // k
    return _solve_groups(X.reshape(r, k, d), items_labels(items).reshape(r, k))


def decode(items: Sequence[DataItem], k: int) -> np.ndarray:
    """Average of the per-group OLS solutions, groups taken in arrival order."""
    solutions, condition = group_mles(items, k)
    bad = np.isnan(solutions[:, 0])
    if bad.any():
        worst = float(np.nan_to_num(condition[bad], nan=np.inf).max())
        raise SingularGroupError(f"{int(bad.sum())} of {len(solutions)} groups are singular", worst)
    return solutions.mean(axis=0)


def ols_fit(items: Sequence[DataItem]) -> np.ndarray:
    """Ordinary least squares over all of ``items`` as one group."""
    return decode(items, len(items))


def _usable_groups(items: Sequence[DataItem], k: int) -> tuple[list[list[DataItem]], np.ndarray, int]:
    solutions, _ = group_mles(items, k)
    keep = ~np.isnan(solutions[:, 0])
    groups = [list(items[j * k:(j + 1) * k]) for j in range(len(solutions)) if keep[j]]
    return groups, solutions[keep], int((~keep).sum())


def calibrate_curvature(spec: Regression, m: int, seed: int) -> float:
    """Smallest eigenvalue of an m-sample estimate of E[x xᵀ]."""
    moment = second_moment_estimate(spec, m, seeded_rng(seed, CALIBRATION_STREAM))
    lam = float(np.linalg.eigvalsh(moment).min())
    if lam <= 0:
        raise ConfigError(f"design second moment is singular (smallest eigenvalue {lam:.3g})")
    return lam


def alg2_step(
    state: GroupedState,
    batch: Sequence[DataItem],
    t: int,
    cfg: RunConfig,
    rng: np.random.Generator | None = None,
    registry: EngineRegistry | None = None,
    curvature: float | None = None,
) -> tuple[GroupedState, MeanEstRound]:
    """One round of subsampling regression.

    The previous estimate is decoded coordinate by coordinate, a gradient step
    on the first m/2 items gives the target z_t, and for each coordinate i the
    groups of the i-th part of N_t whose MLE average best matches [z_t]_i are
    kept. ``curvature`` is λ̂; it defaults to the calibrated value for ``cfg``.
    ``rng`` is unused: the step is deterministic given the batch.
    """
    m, d, k = cfg.m, cfg.d, cfg.group_size
    if len(batch) != m:
        raise ValueError(f"batch holds {len(batch)} items, expected m={m}")
    if len(state.per_coordinate) != d:
        raise ValueError(f"state has {len(state.per_coordinate)} segments, expected d={d}")
    registry = registry if registry is not None else default_registry()
    if curvature is None:
        curvature = calibrate_curvature(cfg.distribution_for("regression"), m, cfg.seed)

    s_prev = np.array([decode(state.per_coordinate[i], k)[i] for i in range(d)])
    half = m // 2
    X = items_matrix(batch[:half])
    Y = items_labels(batch[:half])
    gradient = X.T @ Y - (X.T @ X) @ s_prev
    eta = cfg.eta_schedule.at(t) * 2.0 / (curvature * m)
    z_t = s_prev + eta * gradient

    part = half // d
    r = part // k
    rest = list(batch[half:])
    per_coordinate: list[list[DataItem]] = []
    choices = []
    achieved: list[float] = []
    engines: list[str] = []
    fallback = False
    singular = 0
    for i in range(d):
        candidates = rest[i * part:i * part + r * k]
        groups, solutions, skipped = _usable_groups(candidates, k)
        singular += skipped
        if not groups:
            raise SingularGroupError(f"round {t}: every group for coordinate {i} is singular")
        choice, engine, used_fallback = registry.search(
            cfg.engine, solutions[:, [i]], z_t[[i]], Norm.l2(), cfg.allow_fallback
        )
        per_coordinate.append([item for p in choice.positions for item in groups[p]])
        choices.append(choice)
        achieved.append(choice.achieved[0])
        engines.append(engine)
        fallback = fallback or used_fallback
    if singular:
        logger.warning("Round %d: skipped %d singular group(s)", t, singular)

    return GroupedState(per_coordinate=tuple(tuple(items) for items in per_coordinate), k=k), MeanEstRound(
        t=t,
        s_prev=s_prev,
        y_t=gradient,
        z_t=z_t,
        eta=eta,
        chosen=tuple(choices),
        encoding_error=exact_distance(achieved, z_t, Norm.l2()),
        engine="+".join(dict.fromkeys(engines)),
        fallback=fallback,
        singular_groups=singular,
    )


class SubsamplingRegression(ConfiguredAlgorithm):
    name = "alg2"
    task = "regression"

    def __init__(self, cfg: RunConfig, registry: EngineRegistry | None = None) -> None:
        super().__init__(cfg, registry)
        self.k = cfg.group_size
        self.curvature = calibrate_curvature(self.distribution, cfg.m, cfg.seed)
        self.singular_groups = 0
        logger.debug("Regression run: k=%d, calibrated curvature %.4g", self.k, self.curvature)

    def initialize(self, batch: Sequence[DataItem]) -> SampleState:
        """Segment i holds whole groups from the i-th block of m/d items."""
        self.check_batch(batch)
        block = self.cfg.m // self.cfg.d
        per_coordinate = []
        for i in range(self.cfg.d):
            usable = (block // self.k) * self.k
            groups, _, skipped = _usable_groups(batch[i * block:i * block + usable], self.k)
            self.singular_groups += skipped
            if not groups:
                raise SingularGroupError(f"round 1: every group for coordinate {i} is singular")
            per_coordinate.append(tuple(item for group in groups for item in group))
        return GroupedState(per_coordinate=tuple(per_coordinate), k=self.k).as_sample_state()

    def step(self, state: SampleState, batch: Sequence[DataItem], t: int) -> tuple[SampleState, MeanEstRound]:
        grouped, record = alg2_step(
            GroupedState.from_sample_state(state, self.k), batch, t, self.cfg,
            registry=self.registry, curvature=self.curvature,
        )
        self.singular_groups += record.singular_groups
        return grouped.as_sample_state(), record

    def output(self, state: SampleState) -> np.ndarray:
        grouped = GroupedState.from_sample_state(state, self.k)
        return np.array([decode(grouped.per_coordinate[i], self.k)[i] for i in range(self.cfg.d)])

    def result_fields(self) -> dict:
        return {"k": self.k, "singular_groups": self.singular_groups}


class OlsBaseline(ConfiguredAlgorithm):
    """Keep the whole batch and answer with OLS on it."""

    name = "baseline_ols"
    task = "ols"

    def initialize(self, batch: Sequence[DataItem]) -> SampleState:
        self.check_batch(batch)
        return SampleState(items=tuple(batch))

    def step(self, state: SampleState, batch: Sequence[DataItem], t: int) -> tuple[SampleState, None]:
        return self.initialize(batch), None

    def output(self, state: SampleState) -> np.ndarray:
        return ols_fit(state.items)


def with_prediction_error(result: RunResult) -> RunResult:
    # sup over the unit ball of <estimate - theta, x>^2 is the squared parameter error
    return replace(result, worst_case_pred_error=result.squared_error)


def run_alg2(cfg: RunConfig, check_compliance: bool = False, registry: EngineRegistry | None = None) -> RunResult:
    result = execute_batched(SubsamplingRegression(cfg, registry), cfg, check=check_compliance).result
    return with_prediction_error(result)


def ols_baseline(cfg: RunConfig, check_compliance: bool = False) -> RunResult:
    result = execute_batched(OlsBaseline(cfg), cfg, check=check_compliance).result
    return with_prediction_error(result)


def predict(estimate: Sequence[float], x: Sequence[float]) -> float:
    """Prediction ⟨estimate, x⟩ for a query in the unit ball."""
    estimate = np.asarray(estimate, dtype=float)
    x = np.asarray(x, dtype=float)
    if estimate.shape != x.shape:
        raise InvalidQueryError(f"query has shape {x.shape}, estimate has shape {estimate.shape}")
    if math.sqrt(math.fsum(float(v) ** 2 for v in x)) > 1.0 + 1e-12:
        raise InvalidQueryError("prediction queries must satisfy ||x|| <= 1")
    return math.fsum(float(a) * float(b) for a, b in zip(estimate, x))


@dataclass(frozen=True)
class DensityProbeReport:
    coordinate: int
    k: int
    trials: int
    edges: tuple[float, ...]
    densities: tuple[float, ...]
    min_density: float
    singular_fraction: float
    iqr: float

    def to_dict(self) -> dict:
        return {
            "coordinate": self.coordinate,
            "k": self.k,
            "trials": self.trials,
            "edges": list(self.edges),
            "densities": list(self.densities),
            "min_density": self.min_density,
            "singular_fraction": self.singular_fraction,
            "iqr": self.iqr,
        }


def group_mle_density_probe(
    spec: Regression,
    k: int,
    coordinate: int,
    trials: int,
    rng: np.random.Generator,
    window: float = 0.25,
    bins: int = 20,
) -> DensityProbeReport:
    """Empirical density of one coordinate of a single group's OLS estimate.

    Draws ``trials`` independent groups of k items, histograms coordinate
    ``coordinate`` of the non-singular solutions over θ_i ± window and
    reports the smallest bin density, the singular fraction and the spread.
    """
    d = spec.dimension
    if k < d:
        raise ConfigError(f"group size k={k} is below the dimension d={d}")
    if not 0 <= coordinate < d:
        raise ConfigError(f"coordinate {coordinate} out of range for d={d}")
    if trials < 1:
        raise ConfigError("trials must be at least 1")

    values: list[np.ndarray] = []
    singular = 0
    for start in range(0, trials, _PROBE_CHUNK):
        count = min(_PROBE_CHUNK, trials - start)
        X, Y = spec.sample(count * k, rng)
        solutions, _ = _solve_groups(X.reshape(count, k, d), Y.reshape(count, k))
        column = solutions[:, coordinate]
        ok = ~np.isnan(column)
        singular += int((~ok).sum())
        values.append(column[ok])
    estimates = np.concatenate(values)

    centre = float(spec.theta[coordinate])
    counts, edges = np.histogram(estimates, bins=bins, range=(centre - window, centre + window))
    densities = counts / (max(len(estimates), 1) * (edges[1] - edges[0]))
    if len(estimates):
        q1, q3 = np.percentile(estimates, [25, 75])
        iqr = float(q3 - q1)
    else:
        iqr = math.nan
    report = DensityProbeReport(
        coordinate=coordinate,
        k=k,
        trials=trials,
        edges=tuple(float(e) for e in edges),
        densities=tuple(float(v) for v in densities),
        min_density=float(densities.min()),
        singular_fraction=singular / trials,
        iqr=iqr,
    )
    logger.info(
        "Density probe k=%d coordinate=%d: min density %.4g, singular fraction %.2g, IQR %.4g",
        k, coordinate, report.min_density, report.singular_fraction, report.iqr,
    )
    return report
