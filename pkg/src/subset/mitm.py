from __future__ import annotations

from typing import Sequence

import numpy as np

from ..core.errors import EngineBudgetError
from .base import (
    NearTieShortlist,
    Norm,
    SubsetChoice,
    SubsetEngine,
    lex_weights,
    near_threshold,
    prepare,
)
from .exact import lex_table, subset_table

MITM_BUDGET = 40
# Tied left halves walked per (left size, right size) pair.
_LEFT_WALK = 8


def _half(values: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    sums, sizes = subset_table(values[:, None])
    return sums[:, 0], sizes, np.arange(len(sizes), dtype=np.int64), lex_table(weights)


def _by_size(
    sums: np.ndarray, sizes: np.ndarray, masks: np.ndarray, keys: np.ndarray, max_size: int
) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    groups = []
    for size in range(max_size + 1):
        sel = sizes == size
        order = np.argsort(sums[sel], kind="stable")
        groups.append((sums[sel][order], masks[sel][order], keys[sel][order]))
    return groups


def _nearest(sorted_sums: np.ndarray, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Gap to the closest sorted sum for every query, and that sum's position."""
    pos = np.searchsorted(sorted_sums, queries)
    hi = np.clip(pos, 0, len(sorted_sums) - 1)
    lo = np.clip(pos - 1, 0, len(sorted_sums) - 1)
    hi_gap = np.abs(sorted_sums[hi] - queries)
    lo_gap = np.abs(sorted_sums[lo] - queries)
    return np.minimum(hi_gap, lo_gap), np.where(lo_gap <= hi_gap, lo, hi)


def _top_keys(positions: np.ndarray, keys: np.ndarray, count: int) -> np.ndarray:
    """The ``count`` positions with the largest keys, largest first."""
    if positions.size > count:
        positions = positions[np.argpartition(-keys[positions], count - 1)[:count]]
    return positions[np.argsort(-keys[positions], kind="stable")]


def best_subset_mitm(candidates: Sequence[float], target: float) -> SubsetChoice:
    """Closest-average subset of scalars by meet in the middle.

    The average objective is not additive across halves, so the halves are
    bucketed by subset size and each (left size, right size) pair is matched as
    a sum problem against ``target * (a + b)``. Near-tied pairs are not listed
    in full: per size pair only the earliest few in index-list order and the
    approximate minimizer reach the shortlist.
    """
    matrix, target_arr = prepare(candidates, target)
    if matrix.shape[1] != 1:
        raise ValueError("meet-in-the-middle search handles scalar candidates only")
    n = matrix.shape[0]
    if n > MITM_BUDGET:
        raise EngineBudgetError(f"meet-in-the-middle engine handles at most {MITM_BUDGET} candidates, got {n}")
    values = matrix[:, 0]
    z = float(target_arr[0])
    n_left = n // 2
    n_right = n - n_left
    weights = lex_weights(n)

    left = _by_size(*_half(values[:n_left], weights[:n_left]), n_left)
    right = _by_size(*_half(values[n_left:], weights[n_left:]), n_right)

    pairs = []
    for a in range(n_left + 1):
        for b in range(n_right + 1):
            total = a + b
            if total == 0:
                continue
            gaps, nearest = _nearest(right[b][0], z * total - left[a][0])
            i = int(np.argmin(gaps))
            pairs.append((float(gaps[i]) / total, a, b, i, int(nearest[i])))
    best = min(pair[0] for pair in pairs)

    shortlist = NearTieShortlist()
    for pair_best, a, b, i_min, j_min in pairs:
        if pair_best > near_threshold(best):
            continue
        left_sums, left_masks, left_keys = left[a]
        right_sums, right_masks, right_keys = right[b]
        total = a + b
        threshold = near_threshold(pair_best)
        slack = threshold * total
        queries = z * total - left_sums
        gaps, _ = _nearest(right_sums, queries)
        walk = _top_keys(np.flatnonzero(gaps / total <= threshold), left_keys, _LEFT_WALK)

        chosen_left = [np.array([i_min])]
        chosen_right = [np.array([j_min])]
        remaining = _LEFT_WALK
        for i in walk:
            lo = np.searchsorted(right_sums, queries[i] - slack, side="left")
            hi = np.searchsorted(right_sums, queries[i] + slack, side="right")
            span = np.arange(lo, hi)
            span = span[np.abs(left_sums[i] + right_sums[span] - z * total) / total <= threshold]
            if span.size == 0:
                continue
            span = _top_keys(span, right_keys, remaining)
            chosen_left.append(np.full(span.size, i))
            chosen_right.append(span)
            remaining -= span.size
            if remaining == 0:
                break

        li = np.concatenate(chosen_left)
        rj = np.concatenate(chosen_right)
        shortlist.offer(
            left_masks[li] | (right_masks[rj] << n_left),
            np.abs(left_sums[li] + right_sums[rj] - z * total) / total,
            np.full(li.size, total),
            left_keys[li] + right_keys[rj],
        )
    return shortlist.select(matrix, target_arr, Norm.l2())


def closest_subset_sum(values: Sequence[float], target: float) -> float:
    """Smallest |target − Σ_S x| over all subsets, the empty one included."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError("subset-sum probe takes scalar values")
    if len(arr) > MITM_BUDGET:
        raise EngineBudgetError(f"subset-sum search handles at most {MITM_BUDGET} values, got {len(arr)}")
    n_left = len(arr) // 2
    left_sums = subset_table(arr[:n_left, None])[0][:, 0]
    right_sums = np.sort(subset_table(arr[n_left:, None])[0][:, 0])
    return float(_nearest(right_sums, target - left_sums)[0].min())


class MitmEngine(SubsetEngine):
    name = "mitm"
    budget = MITM_BUDGET
    scalar_only = True

    def search(self, candidates: Sequence, target, norm: Norm | str = "l2") -> SubsetChoice:
        return best_subset_mitm(candidates, target)
