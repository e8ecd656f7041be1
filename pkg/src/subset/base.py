from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..core.errors import EngineBudgetError

# Subsets whose approximate distance lies within this band of the best one are
# re-scored with correctly rounded sums before the tie-break is applied.
_REL_TOL = 1e-9
_ABS_TOL = 1e-12
# Near-tied subsets kept per subset size for exact re-scoring. Duplicate
# candidates tie every subset of a size, so the pool has to stay bounded.
_PER_SIZE = 8


@dataclass(frozen=True)
class Norm:
    kind: str = "l2"
    coordinate: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("l2", "linf", "per_coordinate"):
            raise ValueError(f"unknown norm: {self.kind}")
        if (self.kind == "per_coordinate") != (self.coordinate is not None):
            raise ValueError("per_coordinate norm needs a coordinate, the others take none")

    @classmethod
    def l2(cls) -> Norm:
        return cls("l2")

    @classmethod
    def linf(cls) -> Norm:
        return cls("linf")

    @classmethod
    def per_coordinate(cls, i: int) -> Norm:
        return cls("per_coordinate", i)

    @classmethod
    def parse(cls, value: Norm | str) -> Norm:
        """Accept a Norm, ``"l2"``, ``"linf"`` or ``"per_coordinate:<i>"``."""
        if isinstance(value, Norm):
            return value
        kind, _, coord = value.partition(":")
        return cls(kind, int(coord) if coord else None)

    def __str__(self) -> str:
        return self.kind if self.coordinate is None else f"{self.kind}:{self.coordinate}"


@dataclass(frozen=True)
class SubsetChoice:
    """A chosen subset; ``indices`` are 1-based positions into the candidates."""

    indices: tuple[int, ...]
    achieved: tuple[float, ...]
    distance: float

    def __post_init__(self) -> None:
        if not self.indices:
            raise ValueError("a subset choice must contain at least one candidate")
        if list(self.indices) != sorted(set(self.indices)) or self.indices[0] < 1:
            raise ValueError(f"indices must be sorted, distinct and 1-based, got {self.indices}")

    @property
    def positions(self) -> tuple[int, ...]:
        return tuple(i - 1 for i in self.indices)

    @property
    def cardinality(self) -> int:
        return len(self.indices)

    def to_dict(self) -> dict:
        return {
            "indices": list(self.indices),
            "achieved": list(self.achieved),
            "distance": self.distance,
        }


def prepare(candidates: Sequence, target) -> tuple[np.ndarray, np.ndarray]:
    """Coerce scalars or vectors into an (n, d) matrix and a (d,) target."""
    if len(candidates) == 0:
        raise EngineBudgetError("candidate list is empty")
    matrix = np.asarray(candidates, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix[:, None]
    if matrix.ndim != 2:
        raise ValueError("candidates must all be vectors of the same length")
    target_arr = np.atleast_1d(np.asarray(target, dtype=float))
    if target_arr.shape != (matrix.shape[1],):
        raise ValueError(f"target has shape {target_arr.shape}, candidates have dimension {matrix.shape[1]}")
    return matrix, target_arr


def check_norm(norm: Norm, d: int) -> None:
    if norm.kind == "per_coordinate" and not 0 <= norm.coordinate < d:
        raise ValueError(f"coordinate {norm.coordinate} out of range for dimension {d}")


def approximate_distances(sums: np.ndarray, sizes: np.ndarray, target: np.ndarray, norm: Norm) -> np.ndarray:
    """Vectorized distance of every subset average; empty subsets get +inf."""
    with np.errstate(divide="ignore", invalid="ignore"):
        diff = sums / sizes[:, None] - target
    if norm.kind == "l2":
        dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    elif norm.kind == "linf":
        dist = np.abs(diff).max(axis=1)
    else:
        dist = np.abs(diff[:, norm.coordinate])
    dist[sizes == 0] = np.inf
    return dist


def near_threshold(best):
    return best * (1.0 + _REL_TOL) + _ABS_TOL


def lex_weights(n: int) -> np.ndarray:
    """Bit weights under which a larger total means an earlier index list.

    Between two subsets of equal size the one holding the lowest differing
    position sorts first; weighting position j by 2**(n-1-j) turns that into a
    plain integer comparison. Exact in float64 up to n = 53.
    """
    return 2.0 ** (n - 1 - np.arange(n))


def shortlist_sorted(sizes: np.ndarray, dists: np.ndarray, threshold: float, per_size: int = _PER_SIZE) -> np.ndarray:
    """Positions worth re-scoring from entries already ordered by (size, index list).

    Per size: the approximate minimizer plus the first ``per_size`` entries
    within the near band of that size's minimum. Entries above ``threshold``
    are dropped.
    """
    idx = np.flatnonzero(dists <= threshold)
    if idx.size == 0:
        return idx
    s, d = sizes[idx], dists[idx]
    starts = np.flatnonzero(np.r_[True, s[1:] != s[:-1]])
    group = np.repeat(np.arange(starts.size), np.diff(np.r_[starts, s.size]))
    mins = np.minimum.reduceat(d, starts)

    def rank_in_group(flags: np.ndarray) -> np.ndarray:
        running = np.cumsum(flags)
        before = running[starts] - flags[starts]
        return running - 1 - before[group]

    near = d <= near_threshold(mins)[group]
    is_min = d == mins[group]
    keep = (near & (rank_in_group(near) < per_size)) | (is_min & (rank_in_group(is_min) == 0))
    return idx[keep]


def mask_positions(mask: int) -> tuple[int, ...]:
    positions = []
    j = 0
    while mask:
        if mask & 1:
            positions.append(j)
        mask >>= 1
        j += 1
    return tuple(positions)


def exact_average(matrix: np.ndarray, positions: Sequence[int]) -> tuple[float, ...]:
    size = len(positions)
    return tuple(
        math.fsum(float(matrix[p, c]) for p in positions) / size
        for c in range(matrix.shape[1])
    )


def exact_distance(achieved: Sequence[float], target: np.ndarray, norm: Norm) -> float:
    diffs = [a - float(t) for a, t in zip(achieved, target)]
    if norm.kind == "l2":
        return math.sqrt(math.fsum(x * x for x in diffs))
    if norm.kind == "linf":
        return max(abs(x) for x in diffs)
    return abs(diffs[norm.coordinate])


def select_canonical(
    matrix: np.ndarray,
    target: np.ndarray,
    norm: Norm,
    masks: Iterable[int],
) -> SubsetChoice:
    """Re-score near-tied subsets exactly, then order by (distance, size, indices)."""
    best_key = None
    best_choice = None
    for mask in masks:
        positions = mask_positions(int(mask))
        achieved = exact_average(matrix, positions)
        distance = exact_distance(achieved, target, norm)
        indices = tuple(p + 1 for p in positions)
        key = (distance, len(indices), indices)
        if best_key is None or key < best_key:
            best_key = key
            best_choice = SubsetChoice(indices=indices, achieved=achieved, distance=distance)
    if best_choice is None:
        raise EngineBudgetError("no nonempty subset was scored")
    return best_choice


def choice_from_positions(matrix: np.ndarray, target: np.ndarray, norm: Norm, positions: Sequence[int]) -> SubsetChoice:
    positions = tuple(sorted(positions))
    achieved = exact_average(matrix, positions)
    return SubsetChoice(
        indices=tuple(p + 1 for p in positions),
        achieved=achieved,
        distance=exact_distance(achieved, target, norm),
    )


class NearTieShortlist:
    """Running pool of subsets the canonical order can still pick.

    Engines offer (mask, distance, size, lex key) batches as they search and
    the pool is cut back to a few entries per size after every offer.
    """

    def __init__(self) -> None:
        self.best = math.inf
        self.masks = np.zeros(0, dtype=np.int64)
        self.dists = np.zeros(0)
        self.sizes = np.zeros(0, dtype=np.int64)
        self.keys = np.zeros(0, dtype=np.int64)

    def threshold(self) -> float:
        return near_threshold(self.best)

    def offer(self, masks: np.ndarray, dists: np.ndarray, sizes: np.ndarray, keys: np.ndarray) -> None:
        if dists.size == 0:
            return
        self.best = min(self.best, float(dists.min()))
        masks = np.concatenate([self.masks, np.asarray(masks, dtype=np.int64)])
        dists = np.concatenate([self.dists, dists])
        sizes = np.concatenate([self.sizes, np.asarray(sizes, dtype=np.int64)])
        keys = np.concatenate([self.keys, np.asarray(keys, dtype=np.int64)])
        order = np.lexsort((-keys, sizes))
        keep = order[shortlist_sorted(sizes[order], dists[order], self.threshold())]
        self.masks, self.dists, self.sizes, self.keys = masks[keep], dists[keep], sizes[keep], keys[keep]

    def select(self, matrix: np.ndarray, target: np.ndarray, norm: Norm) -> SubsetChoice:
        return select_canonical(matrix, target, norm, self.masks.tolist())


class SubsetEngine(ABC):
    """Closest-average subset search over a candidate list."""

    name: str = ""
    budget: int | None = None
    scalar_only: bool = False

    def accepts(self, n: int, d: int) -> bool:
        if self.scalar_only and d != 1:
            return False
        return self.budget is None or n <= self.budget

    @abstractmethod
    def search(self, candidates: Sequence, target, norm: Norm | str = "l2") -> SubsetChoice:
        ...
