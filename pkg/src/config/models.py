from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from ..core.errors import ConfigError, reject_unknown_keys
from ..data.distributions import DistributionSpec, GaussianMean, Regression, UniformBox
from ..subset.registry import SELECTABLE_ENGINES

_U64_MAX = (1 << 64) - 1

ETA_KINDS = ("inverse_t", "inverse_lambda_t", "constant")
SWEEP_AXES = ("m", "T", "d", "sigma")
SWEEP_ALGORITHMS = ("alg1", "improved", "alg2", "baseline_mean", "baseline_ols")
TASKS = ("mean", "improved", "regression", "ols")


@dataclass(frozen=True)
class EtaSchedule:
    """Base learning-rate schedule.

    ``inverse_t`` is 1/t, ``inverse_lambda_t`` is 1/(value·t) and
    ``constant`` is value for every round.
    """

    kind: str = "inverse_t"
    value: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ETA_KINDS:
            raise ConfigError(f"unknown eta schedule: {self.kind}")
        if not math.isfinite(self.value):
            raise ConfigError("eta schedule value must be finite")
        if self.kind == "inverse_lambda_t" and self.value <= 0:
            raise ConfigError(f"inverse_lambda_t needs a positive lambda, got {self.value}")
        if self.kind == "constant" and self.value < 0:
            raise ConfigError(f"constant learning rate must be non-negative, got {self.value}")

    def at(self, t: int) -> float:
        if self.kind == "inverse_t":
            return 1.0 / t
        if self.kind == "inverse_lambda_t":
            return 1.0 / (self.value * t)
        return self.value

    def to_dict(self) -> dict:
        return {"kind": self.kind, "value": self.value}

    @classmethod
    def from_dict(cls, data: dict | str) -> EtaSchedule:
        if isinstance(data, str):
            return cls(kind=data)
        reject_unknown_keys(data, {"kind", "value"}, "eta_schedule")
        return cls(kind=data.get("kind", "inverse_t"), value=float(data.get("value", 1.0)))


def default_group_size(d: int) -> int:
    return max(d, math.ceil(2 * d * math.log(max(d, 2))))


def default_distribution(task: str, d: int) -> DistributionSpec:
    if task == "regression":
        return Regression(theta=np.full(d, 0.5), design=UniformBox(B=1.0), noise_sigma=0.5)
    return GaussianMean(theta=np.zeros(d), cov=np.eye(d))


_RUN_KEYS = frozenset({
    "m", "T", "d", "b", "k", "eta_schedule", "seed", "engine", "distribution", "allow_fallback",
})


@dataclass(frozen=True)
class RunConfig:
    m: int = 20
    T: int = 100
    d: int = 1
    b: int | None = None
    k: int | None = None
    eta_schedule: EtaSchedule = field(default_factory=EtaSchedule)
    seed: int = 0
    engine: str = "exact"
    distribution: DistributionSpec | None = None
    allow_fallback: bool = False

    @property
    def split(self) -> int:
        """|R_t|: the configured b, or m // 2."""
        return self.m // 2 if self.b is None else self.b

    @property
    def group_size(self) -> int:
        return default_group_size(self.d) if self.k is None else self.k

    def distribution_for(self, task: str) -> DistributionSpec:
        return default_distribution(task, self.d) if self.distribution is None else self.distribution

    def with_seed(self, seed: int) -> RunConfig:
        return replace(self, seed=seed)

    def validate(self, task: str = "mean") -> RunConfig:
        """Check every invariant for ``task``; returns self so calls chain."""
        if task not in TASKS:
            raise ConfigError(f"unknown task: {task}")
        for name in ("m", "T", "d"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0 <= self.seed <= _U64_MAX:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.engine not in SELECTABLE_ENGINES:
            raise ConfigError(f"engine must be one of {', '.join(SELECTABLE_ENGINES)}, got {self.engine!r}")
        if self.m < 2:
            raise ConfigError("m must be at least 2 so both halves of a batch are nonempty")
        if not 1 <= self.split < self.m:
            raise ConfigError(f"b must satisfy 1 <= b < m, got b={self.split}, m={self.m}")

        distribution = self.distribution_for(task)
        if distribution.dimension != self.d:
            raise ConfigError(f"distribution has dimension {distribution.dimension}, config has d={self.d}")
        expected = "regression" if task in ("regression", "ols") else "mean"
        if distribution.task != expected:
            raise ConfigError(f"{task} runs need a {expected} distribution, got {distribution.variant}")

        if task == "improved":
            if self.m % self.d:
                raise ConfigError(f"m={self.m} is not divisible by d={self.d}")
            if self.m // self.d < 4:
                raise ConfigError(f"per-coordinate memory m/d={self.m // self.d} is below 4")
            if self.split % self.d:
                raise ConfigError(f"b={self.split} is not divisible by d={self.d}")
        if task == "regression":
            k = self.group_size
            if k < self.d:
                raise ConfigError(f"group size k={k} must be at least d={self.d}")
            if self.m % (2 * self.d):
                raise ConfigError(f"m={self.m} must be divisible by 2d={2 * self.d}")
            if self.m // (2 * self.d) < k:
                raise ConfigError(f"m/(2d)={self.m // (2 * self.d)} leaves no room for a group of k={k}")
        return self

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "m": self.m,
            "T": self.T,
            "d": self.d,
            "b": self.b,
            "k": self.k,
            "eta_schedule": self.eta_schedule.to_dict(),
            "seed": self.seed,
            "engine": self.engine,
            "allow_fallback": self.allow_fallback,
        }
        if self.distribution is not None:
            d["distribution"] = self.distribution.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        reject_unknown_keys(data, _RUN_KEYS, "run config")
        defaults = cls()
        distribution = data.get("distribution")
        try:
            return cls(
                m=int(data.get("m", defaults.m)),
                T=int(data.get("T", defaults.T)),
                d=int(data.get("d", defaults.d)),
                b=None if data.get("b") is None else int(data["b"]),
                k=None if data.get("k") is None else int(data["k"]),
                eta_schedule=EtaSchedule.from_dict(data.get("eta_schedule", "inverse_t")),
                seed=int(data.get("seed", defaults.seed)),
                engine=data.get("engine", defaults.engine),
                distribution=None if distribution is None else DistributionSpec.from_dict(distribution),
                allow_fallback=bool(data.get("allow_fallback", False)),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"invalid run config: {exc}") from exc


_SWEEP_KEYS = frozenset({"base", "axis", "values", "seeds", "algorithm"})


@dataclass(frozen=True)
class SweepSpec:
    base: RunConfig = field(default_factory=RunConfig)
    axis: str = "T"
    values: tuple[float, ...] = (50, 100, 200, 400)
    seeds: int = 10
    algorithm: str = "alg1"

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"sweep axis must be one of {', '.join(SWEEP_AXES)}, got {self.axis!r}")
        if self.algorithm not in SWEEP_ALGORITHMS:
            raise ConfigError(f"sweep algorithm must be one of {', '.join(SWEEP_ALGORITHMS)}, got {self.algorithm!r}")
        if not self.values:
            raise ConfigError("sweep values must not be empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError(f"sweep values must be strictly increasing, got {list(self.values)}")
        if self.axis != "sigma" and any(float(v) != int(v) for v in self.values):
            raise ConfigError(f"axis {self.axis} takes integer values")
        if self.seeds < 1:
            raise ConfigError(f"seeds must be a positive count, got {self.seeds}")
        if self.axis == "d" and self.base.distribution is not None:
            raise ConfigError("a sweep over d builds its own distributions; drop base.distribution")

    def config_at(self, value: float) -> RunConfig:
        """Base config with the swept axis set to ``value``."""
        if self.axis == "sigma":
            task = "regression" if self.algorithm in ("alg2", "baseline_ols") else "mean"
            return replace(self.base, distribution=self.base.distribution_for(task).with_sigma(float(value)))
        return replace(self.base, **{self.axis: int(value)})

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "axis": self.axis,
            "values": list(self.values),
            "seeds": self.seeds,
            "algorithm": self.algorithm,
        }

    @classmethod
    def from_dict(cls, data: dict) -> SweepSpec:
        reject_unknown_keys(data, _SWEEP_KEYS, "sweep spec")
        values = data.get("values", [])
        if not isinstance(values, list):
            raise ConfigError("sweep values must be a list")
        return cls(
            base=RunConfig.from_dict(data.get("base", {})),
            axis=data.get("axis", "T"),
            values=tuple(values),
            seeds=int(data.get("seeds", 10)),
            algorithm=data.get("algorithm", "alg1"),
        )
