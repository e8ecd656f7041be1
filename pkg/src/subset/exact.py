from __future__ import annotations

import logging
from typing import Sequence

import numpy as np

from ..core.errors import EngineBudgetError
from .base import (
    NearTieShortlist,
    Norm,
    SubsetChoice,
    SubsetEngine,
    approximate_distances,
    check_norm,
    lex_weights,
    near_threshold,
    prepare,
    shortlist_sorted,
)

logger = logging.getLogger(__name__)

EXACT_BUDGET = 24
CHUNK_SIZE = 20
_LOW_BITS = 16


def subset_table(block: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sums and sizes of all subsets of the rows of ``block``; row i is bitmask i."""
    sums = np.zeros((1, block.shape[1]))
    sizes = np.zeros(1, dtype=np.int64)
    for row in block:
        sums = np.concatenate([sums, sums + row])
        sizes = np.concatenate([sizes, sizes + 1])
    return sums, sizes


def lex_table(weights: np.ndarray) -> np.ndarray:
    """Lex key of every subset of ``weights``' positions, in bitmask order."""
    return subset_table(weights[:, None])[0][:, 0].astype(np.int64)


def enumerate_near_best(matrix: np.ndarray, target: np.ndarray, norm: Norm) -> NearTieShortlist:
    """Shortlist of the subsets near the global optimum.

    The low bits are tabulated once and the high bits swept in blocks, so memory
    stays at 2**16 rows whatever the candidate count. Within a block the high
    bits are fixed, so the low table's (size, index list) order is reused and
    each block contributes only a few entries per size.
    """
    n = matrix.shape[0]
    low = min(n, _LOW_BITS)
    low_sums, low_sizes = subset_table(matrix[:low])
    high_sums, high_sizes = subset_table(matrix[low:])
    weights = lex_weights(n)
    low_keys = lex_table(weights[:low])
    high_keys = lex_table(weights[low:])
    low_order = np.lexsort((-low_keys, low_sizes))
    sorted_sizes = low_sizes[low_order]

    shortlist = NearTieShortlist()
    for h in range(len(high_sizes)):
        dist = approximate_distances(low_sums + high_sums[h], low_sizes + high_sizes[h], target, norm)
        block_best = float(dist.min())
        if block_best > shortlist.threshold():
            continue
        threshold = near_threshold(min(shortlist.best, block_best))
        picked = low_order[shortlist_sorted(sorted_sizes, dist[low_order], threshold)]
        shortlist.offer(
            picked + (h << low),
            dist[picked],
            low_sizes[picked] + high_sizes[h],
            low_keys[picked] + high_keys[h],
        )
    return shortlist


def best_subset_exact(candidates: Sequence, target, norm: Norm | str = "l2") -> SubsetChoice:
    """Global closest-average subset by full enumeration of the 2**n − 1 nonempty subsets."""
    matrix, target_arr = prepare(candidates, target)
    norm = Norm.parse(norm)
    check_norm(norm, matrix.shape[1])
    n = matrix.shape[0]
    if n > EXACT_BUDGET:
        raise EngineBudgetError(f"exact engine enumerates at most {EXACT_BUDGET} candidates, got {n}")
    return enumerate_near_best(matrix, target_arr, norm).select(matrix, target_arr, norm)


def best_subset_chunked(candidates: Sequence, target, norm: Norm | str = "l2", chunk: int = CHUNK_SIZE) -> SubsetChoice:
    """Exact search inside consecutive chunks; keeps the best chunk-local subset.

    Not a global optimum once there is more than one chunk.
    """
    matrix, target_arr = prepare(candidates, target)
    norm = Norm.parse(norm)
    best: SubsetChoice | None = None
    for start in range(0, matrix.shape[0], chunk):
        local = best_subset_exact(matrix[start:start + chunk], target_arr, norm)
        shifted = SubsetChoice(
            indices=tuple(i + start for i in local.indices),
            achieved=local.achieved,
            distance=local.distance,
        )
        if best is None or (shifted.distance, shifted.cardinality, shifted.indices) < (
            best.distance, best.cardinality, best.indices
        ):
            best = shifted
    assert best is not None
    return best


class ExactEngine(SubsetEngine):
    name = "exact"
    budget = EXACT_BUDGET

    def search(self, candidates: Sequence, target, norm: Norm | str = "l2") -> SubsetChoice:
        return best_subset_exact(candidates, target, norm)


class ChunkedEngine(SubsetEngine):
    name = "chunked"

    def search(self, candidates: Sequence, target, norm: Norm | str = "l2") -> SubsetChoice:
        logger.debug("Chunked search over %d candidates", len(candidates))
        return best_subset_chunked(candidates, target, norm)
