from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import Any, ClassVar

import numpy as np

from ..core.errors import ConfigError, DistributionError, reject_unknown_keys
from ..core.types import DataItem

logger = logging.getLogger(__name__)

# Two-sided standard normal quantile with tail mass 1e-3.
_CLIP_Z = 3.2905


def _vector(data: Any, name: str) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers") from exc
    if arr.ndim != 1 or arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} must be a nonempty list of finite numbers")
    return arr


def _covariance(data: Any, d: int, name: str) -> np.ndarray:
    cov = np.asarray(data, dtype=float)
    if cov.shape != (d, d):
        raise DistributionError(f"{name} must be a {d}x{d} matrix, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12):
        raise DistributionError(f"{name} must be symmetric")
    eigenvalues = np.linalg.eigvalsh(cov)
    if eigenvalues.min() <= 0:
        raise DistributionError(f"{name} has a non-positive eigenvalue ({eigenvalues.min():.3g})")
    return cov


class DesignSpec(ABC):
    """Distribution G of regression predictors over [0, B]^d."""

    kind: ClassVar[str] = ""

    @abstractmethod
    def sample(self, m: int, d: int, rng: np.random.Generator) -> np.ndarray:
        ...

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    @staticmethod
    def from_dict(data: dict, d: int) -> DesignSpec:
        kind = data.get("kind")
        if kind == UniformBox.kind:
            reject_unknown_keys(data, {"kind", "B"}, "design")
            return UniformBox(B=float(data.get("B", 1.0)))
        if kind == GaussianClipped.kind:
            reject_unknown_keys(data, {"kind", "B", "cov", "mean"}, "design")
            B = float(data.get("B", 1.0))
            mean = data.get("mean")
            return GaussianClipped(
                B=B,
                cov=_covariance(data.get("cov", np.eye(d) * (B / (4 * _CLIP_Z)) ** 2), d, "design.cov"),
                mean=None if mean is None else _vector(mean, "design.mean"),
            )
        raise ConfigError(f"unknown design kind: {kind}")


@dataclass(frozen=True)
class UniformBox(DesignSpec):
    kind: ClassVar[str] = "uniform_box"
    B: float = 1.0

    def __post_init__(self) -> None:
        if self.B <= 0:
            raise DistributionError(f"B must be positive, got {self.B}")

    def sample(self, m: int, d: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(0.0, self.B, size=(m, d))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "B": self.B}


@dataclass(frozen=True, eq=False)
class GaussianClipped(DesignSpec):
    """Gaussian predictors centred in the box and clamped to [0, B].

    The covariance is rejected unless every coordinate stays inside the box
    with probability at least 1 − 10⁻³.
    """

    kind: ClassVar[str] = "gaussian_clipped"
    B: float = 1.0
    cov: np.ndarray = field(default_factory=lambda: np.eye(1))
    mean: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.B <= 0:
            raise DistributionError(f"B must be positive, got {self.B}")
        centre = self.centre(self.cov.shape[0])
        half_width = np.minimum(centre, self.B - centre)
        if np.any(_CLIP_Z * np.sqrt(np.diag(self.cov)) > half_width):
            raise DistributionError("design covariance too wide: clamping probability would exceed 1e-3")

    def centre(self, d: int) -> np.ndarray:
        return np.full(d, self.B / 2) if self.mean is None else self.mean

    def sample(self, m: int, d: int, rng: np.random.Generator) -> np.ndarray:
        chol = np.linalg.cholesky(self.cov)
        raw = self.centre(d) + rng.standard_normal((m, d)) @ chol.T
        return np.clip(raw, 0.0, self.B)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind, "B": self.B, "cov": self.cov.tolist()}
        if self.mean is not None:
            d["mean"] = self.mean.tolist()
        return d


class DistributionSpec(ABC):
    """Generative model of the stream; every variant carries the true θ."""

    variant: ClassVar[str] = ""
    task: ClassVar[str] = "mean"
    theta: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.theta.shape[0])

    @abstractmethod
    def sample(self, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray | None]:
        """Return (values, labels) arrays for m i.i.d. items."""

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    @abstractmethod
    def with_sigma(self, sigma: float) -> DistributionSpec:
        """Copy with the noise scale replaced (the ``sigma`` sweep axis)."""

    @staticmethod
    def from_dict(data: dict) -> DistributionSpec:
        variant = data.get("variant")
        cls = _VARIANTS.get(variant)
        if cls is None:
            raise ConfigError(f"unknown distribution variant: {variant}")
        return cls.parse(data)


@dataclass(frozen=True, eq=False)
class GaussianMean(DistributionSpec):
    variant: ClassVar[str] = "gaussian_mean"
    theta: np.ndarray = field(default_factory=lambda: np.zeros(1))
    cov: np.ndarray = field(default_factory=lambda: np.eye(1))
    eigen_bounds: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        _covariance(self.cov, self.dimension, "cov")
        if self.eigen_bounds is not None:
            lo, hi = self.eigen_bounds
            if lo <= 0 or hi < lo:
                raise DistributionError(f"eigen_bounds must satisfy 0 < lo <= hi, got {self.eigen_bounds}")
            eigenvalues = np.linalg.eigvalsh(self.cov)
            if eigenvalues.min() < lo or eigenvalues.max() > hi:
                raise DistributionError(
                    f"cov eigenvalues [{eigenvalues.min():.3g}, {eigenvalues.max():.3g}] outside {self.eigen_bounds}"
                )

    @classmethod
    def parse(cls, data: dict) -> GaussianMean:
        reject_unknown_keys(data, {"variant", "theta", "cov", "eigen_bounds"}, "gaussian_mean")
        theta = _vector(data.get("theta", [0.0]), "theta")
        bounds = data.get("eigen_bounds")
        return cls(
            theta=theta,
            cov=np.asarray(data.get("cov", np.eye(theta.size)), dtype=float),
            eigen_bounds=None if bounds is None else (float(bounds[0]), float(bounds[1])),
        )

    def sample(self, m: int, rng: np.random.Generator) -> tuple[np.ndarray, None]:
        chol = np.linalg.cholesky(self.cov)
        return self.theta + rng.standard_normal((m, self.dimension)) @ chol.T, None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"variant": self.variant, "theta": self.theta.tolist(), "cov": self.cov.tolist()}
        if self.eigen_bounds is not None:
            d["eigen_bounds"] = list(self.eigen_bounds)
        return d

    def with_sigma(self, sigma: float) -> GaussianMean:
        return replace(self, cov=np.eye(self.dimension) * sigma**2, eigen_bounds=None)


@dataclass(frozen=True, eq=False)
class ContaminatedUniformMean(DistributionSpec):
    """Per coordinate: U[θ−γ, θ+γ] with probability p, else N(θ, σ²).

    The marginal density on the window is at least p/(2γ) by construction.
    """

    variant: ClassVar[str] = "contaminated_uniform_mean"
    theta: np.ndarray = field(default_factory=lambda: np.zeros(1))
    gamma: float = 1.0
    p: float = 0.5
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.gamma <= 0:
            raise DistributionError(f"gamma must be positive, got {self.gamma}")
        if not 0 < self.p <= 1:
            raise DistributionError(f"p must lie in (0, 1], got {self.p}")
        if self.sigma <= 0:
            raise DistributionError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def parse(cls, data: dict) -> ContaminatedUniformMean:
        reject_unknown_keys(data, {"variant", "theta", "gamma", "p", "sigma"}, "contaminated_uniform_mean")
        return cls(
            theta=_vector(data.get("theta", [0.0]), "theta"),
            gamma=float(data.get("gamma", 1.0)),
            p=float(data.get("p", 0.5)),
            sigma=float(data.get("sigma", 1.0)),
        )

    @property
    def density_floor(self) -> float:
        return self.p / (2 * self.gamma)

    @property
    def coordinate_variance(self) -> float:
        return self.p * self.gamma**2 / 3 + (1 - self.p) * self.sigma**2

    def sample(self, m: int, rng: np.random.Generator) -> tuple[np.ndarray, None]:
        shape = (m, self.dimension)
        from_window = rng.random(shape) < self.p
        window = rng.uniform(self.theta - self.gamma, self.theta + self.gamma, size=shape)
        tail = self.theta + self.sigma * rng.standard_normal(shape)
        return np.where(from_window, window, tail), None

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "theta": self.theta.tolist(),
            "gamma": self.gamma,
            "p": self.p,
            "sigma": self.sigma,
        }

    def with_sigma(self, sigma: float) -> ContaminatedUniformMean:
        return replace(self, sigma=sigma)


@dataclass(frozen=True, eq=False)
class PointMass(DistributionSpec):
    variant: ClassVar[str] = "point_mass"
    theta: np.ndarray = field(default_factory=lambda: np.zeros(1))

    @classmethod
    def parse(cls, data: dict) -> PointMass:
        reject_unknown_keys(data, {"variant", "theta"}, "point_mass")
        return cls(theta=_vector(data.get("theta", [0.0]), "theta"))

    def sample(self, m: int, rng: np.random.Generator) -> tuple[np.ndarray, None]:
        return np.tile(self.theta, (m, 1)), None

    def to_dict(self) -> dict:
        return {"variant": self.variant, "theta": self.theta.tolist()}

    def with_sigma(self, sigma: float) -> PointMass:
        raise ConfigError("a point mass has no noise scale to sweep")


@dataclass(frozen=True, eq=False)
class Regression(DistributionSpec):
    """x ~ G over [0, B]^d, y = ⟨θ, x⟩ + ε with ε ~ N(0, σ²)."""

    variant: ClassVar[str] = "regression"
    task: ClassVar[str] = "regression"
    theta: np.ndarray = field(default_factory=lambda: np.zeros(1))
    design: DesignSpec = field(default_factory=UniformBox)
    noise_sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.noise_sigma < 0:
            raise DistributionError(f"noise_sigma must be non-negative, got {self.noise_sigma}")

    @classmethod
    def parse(cls, data: dict) -> Regression:
        reject_unknown_keys(data, {"variant", "theta", "design", "noise_sigma"}, "regression")
        theta = _vector(data.get("theta", [0.0]), "theta")
        return cls(
            theta=theta,
            design=DesignSpec.from_dict(data.get("design", {"kind": "uniform_box"}), theta.size),
            noise_sigma=float(data.get("noise_sigma", 1.0)),
        )

    def responses(self, X: np.ndarray) -> np.ndarray:
        # Coordinates accumulate left to right so noiseless labels equal ⟨θ, x⟩ bit for bit.
        y = np.zeros(X.shape[0])
        for j in range(self.dimension):
            y = y + X[:, j] * self.theta[j]
        return y

    def sample(self, m: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        X = self.design.sample(m, self.dimension, rng)
        y = self.responses(X)
        if self.noise_sigma > 0:
            y = y + self.noise_sigma * rng.standard_normal(m)
        return X, y

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "theta": self.theta.tolist(),
            "design": self.design.to_dict(),
            "noise_sigma": self.noise_sigma,
        }

    def with_sigma(self, sigma: float) -> Regression:
        return replace(self, noise_sigma=sigma)


_VARIANTS: dict[str, type] = {
    GaussianMean.variant: GaussianMean,
    ContaminatedUniformMean.variant: ContaminatedUniformMean,
    PointMass.variant: PointMass,
    Regression.variant: Regression,
}


def draw_batch(spec: DistributionSpec, m: int, rng: np.random.Generator, round_index: int) -> list[DataItem]:
    """Draw m i.i.d. items stamped with ``round_index`` and their batch slot."""
    if m < 1:
        raise ValueError(f"batch size must be at least 1, got {m}")
    values, labels = spec.sample(m, rng)
    return [
        DataItem(
            values=tuple(values[j].tolist()),
            arrival_round=round_index,
            label=None if labels is None else float(labels[j]),
            offset=j,
        )
        for j in range(m)
    ]


def second_moment_estimate(spec: Regression, n: int, rng: np.random.Generator) -> np.ndarray:
    """Monte-Carlo estimate of E[x xᵀ] from n design draws."""
    X = spec.design.sample(n, spec.dimension, rng)
    return X.T @ X / n
