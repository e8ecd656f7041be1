from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .base import Norm, SubsetChoice, SubsetEngine, approximate_distances, check_norm, choice_from_positions, prepare


def _distance(total: np.ndarray, size: int, target: np.ndarray, norm: Norm) -> float:
    return float(approximate_distances(total[None, :], np.array([size]), target, norm)[0])


def best_subset_greedy(candidates: Sequence, target, norm: Norm | str = "l2") -> SubsetChoice:
    """Forward selection followed by one pass of single-item swaps.

    No optimality guarantee; callers report every round that relies on it.
    """
    matrix, target_arr = prepare(candidates, target)
    norm = Norm.parse(norm)
    check_norm(norm, matrix.shape[1])
    n = matrix.shape[0]

    chosen: list[int] = []
    total = np.zeros(matrix.shape[1])
    current = math.inf
    while len(chosen) < n:
        rest = [j for j in range(n) if j not in chosen]
        trial = approximate_distances(total + matrix[rest], np.full(len(rest), len(chosen) + 1), target_arr, norm)
        j = int(np.argmin(trial))
        if trial[j] >= current:
            break
        chosen.append(rest[j])
        total = total + matrix[rest[j]]
        current = float(trial[j])

    for out in list(chosen):
        for inc in range(n):
            if inc in chosen:
                continue
            swapped = total - matrix[out] + matrix[inc]
            dist = _distance(swapped, len(chosen), target_arr, norm)
            if dist < current:
                chosen[chosen.index(out)] = inc
                total = swapped
                current = dist
                break

    return choice_from_positions(matrix, target_arr, norm, chosen)


class GreedyEngine(SubsetEngine):
    name = "greedy"

    def search(self, candidates: Sequence, target, norm: Norm | str = "l2") -> SubsetChoice:
        return best_subset_greedy(candidates, target, norm)
