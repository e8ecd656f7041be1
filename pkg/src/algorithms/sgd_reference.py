from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..core.errors import ConfigError
from ..core.rng import SGD_STREAM, seeded_rng

logger = logging.getLogger(__name__)

NOISE_KINDS = ("zero", "gaussian", "adversarial")
BOUND_FACTOR = 7.0


@dataclass(frozen=True, eq=False)
class NoisySgdSpec:
    """SGD on H(w) = λ/2·‖w − θ‖² with noisy gradients and injected noise ζ_t.

    The gradient oracle adds zero-mean Gaussian noise to λ(w − θ), sized so
    that E‖ĝ‖² ≤ Γ² holds wherever it can (see ``noisy_gradient``).
    ``noise`` picks ζ_t: ``zero``, ``gaussian`` with E‖ζ_t‖² = scale², or
    ``adversarial``, which pushes w_t straight away from θ by exactly
    ``scale``.
    """

    theta: np.ndarray = field(default_factory=lambda: np.zeros(1))
    lam: float = 1.0
    Gamma: float = 1.0
    noise: str = "zero"
    noise_scale: float = 0.0
    w0: np.ndarray | None = None
    T: int = 100
    eta_scale: float = 1.0
    budget_violating: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta", np.atleast_1d(np.asarray(self.theta, dtype=float)))
        w0 = self.theta.copy() if self.w0 is None else np.atleast_1d(np.asarray(self.w0, dtype=float))
        object.__setattr__(self, "w0", w0)
        if w0.shape != self.theta.shape:
            raise ConfigError(f"w0 has shape {w0.shape}, theta has shape {self.theta.shape}")
        if self.lam <= 0:
            raise ConfigError(f"lambda must be positive, got {self.lam}")
        if self.Gamma < 0:
            raise ConfigError(f"Gamma must be non-negative, got {self.Gamma}")
        if self.noise not in NOISE_KINDS:
            raise ConfigError(f"noise must be one of {', '.join(NOISE_KINDS)}, got {self.noise!r}")
        if self.noise_scale < 0:
            raise ConfigError("noise scale must be non-negative")
        if self.T < 2:
            raise ConfigError(f"T must be at least 2, got {self.T}")
        if self.eta_scale <= 0:
            raise ConfigError(f"eta_scale must be positive, got {self.eta_scale}")
        if self.noise != "zero" and self.noise_scale > self.noise_budget * (1 + 1e-12) and not self.budget_violating:
            raise ConfigError(
                f"noise scale {self.noise_scale:.3g} exceeds the budget {self.noise_budget:.3g}; "
                "set budget_violating to run it anyway"
            )

    @property
    def dimension(self) -> int:
        return int(self.theta.shape[0])

    @property
    def noise_budget(self) -> float:
        """Largest admissible RMS of ζ_t: Γ/(λ·T^1.5)."""
        return self.Gamma / (self.lam * self.T ** 1.5)

    def bound(self, t: np.ndarray | int) -> np.ndarray | float:
        return BOUND_FACTOR * self.Gamma ** 2 / (self.lam ** 2 * np.asarray(t, dtype=float))


def _draw_noise(spec: NoisySgdSpec, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Standard normals for the gradient oracle and the scaled ζ_t draws."""
    shape = (spec.T, spec.dimension)
    gradient_draws = rng.standard_normal(shape)
    if spec.noise == "gaussian":
        zeta = rng.standard_normal(shape) * (spec.noise_scale / math.sqrt(spec.dimension))
    else:
        zeta = np.zeros(shape)
    return gradient_draws, zeta


def noisy_gradient(spec: NoisySgdSpec, w: np.ndarray, draws: np.ndarray) -> np.ndarray:
    """Unbiased gradient estimates for a stack of iterates ``w`` of shape (S, d).

    The noise variance is Γ² − λ²‖w − θ‖², split evenly over the coordinates,
    so E‖ĝ‖² = Γ² while λ‖w − θ‖ ≤ Γ. Outside that ball the exact gradient
    comes back.
    """
    exact = spec.lam * (w - spec.theta)
    spare = np.maximum(spec.Gamma ** 2 - np.einsum("ij,ij->i", exact, exact), 0.0)
    return exact + draws * np.sqrt(spare / spec.dimension)[:, None]


def _trajectories(spec: NoisySgdSpec, gradient_draws: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Run the update for a stack of (S, T, d) noise draws; returns (S, T) losses."""
    runs = gradient_draws.shape[0]
    w = np.tile(spec.w0, (runs, 1))
    losses = np.empty((runs, spec.T))
    outward_default = np.zeros(spec.dimension)
    outward_default[0] = 1.0
    for t in range(1, spec.T + 1):
        eta = spec.eta_scale / (spec.lam * t)
        w = w - eta * noisy_gradient(spec, w, gradient_draws[:, t - 1])
        if spec.noise == "adversarial" and spec.noise_scale > 0:
            offset = w - spec.theta
            norms = np.linalg.norm(offset, axis=1, keepdims=True)
            direction = np.where(norms > 0, offset / np.where(norms > 0, norms, 1.0), outward_default)
            w = w + spec.noise_scale * direction
        else:
            w = w + zeta[:, t - 1]
        diff = w - spec.theta
        losses[:, t - 1] = np.einsum("ij,ij->i", diff, diff)
    return losses


def run_noisy_sgd(spec: NoisySgdSpec, rng: np.random.Generator) -> np.ndarray:
    """Trajectory L_t = ‖w_t − θ‖² for t = 1..T."""
    gradient_draws, zeta = _draw_noise(spec, rng)
    return _trajectories(spec, gradient_draws[None], zeta[None])[0]


@dataclass(frozen=True)
class SgdBoundReport:
    t: tuple[int, ...]
    mean_loss: tuple[float, ...]
    bound: tuple[float, ...]
    seeds: int
    first_violation: int | None

    @property
    def holds(self) -> bool:
        """Whether mean L_t stays under the bound for every t >= 2."""
        return self.first_violation is None

    def rows(self) -> list[tuple[int, float, float]]:
        return list(zip(self.t, self.mean_loss, self.bound))


def sgd_bound_check(spec: NoisySgdSpec, seeds: int, base_seed: int = 0) -> SgdBoundReport:
    """Average L_t over ``seeds`` trajectories and compare with 7Γ²/(λ²t).

    Seed i draws from ``seeded_rng(base_seed + i, SGD_STREAM)``. Round 1 is
    reported but not checked.
    """
    if seeds < 1:
        raise ConfigError("seeds must be at least 1")
    draws = [_draw_noise(spec, seeded_rng(base_seed + i, SGD_STREAM)) for i in range(seeds)]
    losses = _trajectories(spec, np.stack([g for g, _ in draws]), np.stack([z for _, z in draws]))
    mean_loss = losses.mean(axis=0)
    t = np.arange(1, spec.T + 1)
    bound = spec.bound(t)
    over = np.nonzero(mean_loss[1:] > bound[1:])[0]
    first = int(t[1:][over[0]]) if over.size else None
    if first is None:
        logger.info("SGD bound holds for t in [2, %d] over %d seeds", spec.T, seeds)
    else:
        logger.info("SGD bound first exceeded at t=%d (%d seeds)", first, seeds)
    return SgdBoundReport(
        t=tuple(int(v) for v in t),
        mean_loss=tuple(float(v) for v in mean_loss),
        bound=tuple(float(v) for v in bound),
        seeds=seeds,
        first_violation=first,
    )
