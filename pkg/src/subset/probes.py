from __future__ import annotations

import logging

import numpy as np

from .base import Norm
from .exact import EXACT_BUDGET, best_subset_exact
from .mitm import MITM_BUDGET, closest_subset_sum

logger = logging.getLogger(__name__)

VECTOR_PROBE_MAX_N = 20
VECTOR_PROBE_MAX_D = 3


def rss_success_probability(n: int, epsilon: float, trials: int, rng: np.random.Generator) -> float:
    """Fraction of trials where some subset SUM of n U[-1, 1] draws lands within
    epsilon of a target drawn from U[-1/2, 1/2]. The empty sum counts."""
    if not 1 <= n <= MITM_BUDGET:
        raise ValueError(f"n must lie in [1, {MITM_BUDGET}], got {n}")
    if epsilon <= 0 or trials < 1:
        raise ValueError("epsilon must be positive and trials at least 1")
    hits = 0
    for _ in range(trials):
        values = rng.uniform(-1.0, 1.0, size=n)
        z = rng.uniform(-0.5, 0.5)
        if closest_subset_sum(values, z) < epsilon:
            hits += 1
    probability = hits / trials
    logger.info("RSS probe n=%d epsilon=%g trials=%d -> %.4f", n, epsilon, trials, probability)
    return probability


def rss_vector_success_probability(
    n: int,
    d: int,
    epsilon: float,
    trials: int,
    rng: np.random.Generator,
    sigma: float = 1.0,
) -> float:
    """Multidimensional counterpart: n vectors from N(0, sigma² I_d), target
    uniform on [-sigma, sigma]^d, success iff some nonempty subset AVERAGE is
    within 2·epsilon of the target in the max norm."""
    if not 1 <= n <= min(VECTOR_PROBE_MAX_N, EXACT_BUDGET):
        raise ValueError(f"n must lie in [1, {VECTOR_PROBE_MAX_N}], got {n}")
    if not 1 <= d <= VECTOR_PROBE_MAX_D:
        raise ValueError(f"d must lie in [1, {VECTOR_PROBE_MAX_D}], got {d}")
    hits = 0
    for _ in range(trials):
        vectors = rng.normal(0.0, sigma, size=(n, d))
        z = rng.uniform(-sigma, sigma, size=d)
        if best_subset_exact(vectors, z, Norm.linf()).distance <= 2 * epsilon:
            hits += 1
    return hits / trials
