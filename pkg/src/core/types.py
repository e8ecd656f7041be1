from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

if TYPE_CHECKING:
    from ..recency.compliance import ComplianceReport
    from ..subset.base import SubsetChoice


@dataclass(frozen=True)
class DataItem:
    """One stream element.

    ``arrival_round`` is the batch round in the batched model and the stream
    position in the streaming model; ``offset`` is the slot the item occupied
    in its arriving batch, which lets adapters move between the two stamps.
    """

    values: tuple[float, ...]
    arrival_round: int
    label: float | None = None
    offset: int = 0
    deadline_round: int | None = None

    def __post_init__(self) -> None:
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("DataItem.values must not be empty")
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"DataItem.values must be finite, got {values}")
        if self.label is not None and not math.isfinite(self.label):
            raise ValueError(f"DataItem.label must be finite, got {self.label}")
        if self.arrival_round < 1:
            raise ValueError(f"arrival_round must be positive, got {self.arrival_round}")
        if self.offset < 0:
            raise ValueError(f"offset must be non-negative, got {self.offset}")
        object.__setattr__(self, "values", values)
        if self.label is not None:
            object.__setattr__(self, "label", float(self.label))

    @property
    def dimension(self) -> int:
        return len(self.values)

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "values": list(self.values),
            "label": self.label,
            "arrival_round": self.arrival_round,
            "offset": self.offset,
        }
        if self.deadline_round is not None:
            d["deadline_round"] = self.deadline_round
        return d

    @classmethod
    def from_dict(cls, data: dict) -> DataItem:
        return cls(
            values=tuple(data.get("values", ())),
            arrival_round=data.get("arrival_round", 1),
            label=data.get("label"),
            offset=data.get("offset", 0),
            deadline_round=data.get("deadline_round"),
        )


def as_stream_item(item: DataItem, m: int) -> DataItem:
    """Restamp a batch-stamped item with its 1-based stream position."""
    position = (item.arrival_round - 1) * m + item.offset + 1
    deadline = item.deadline_round
    if deadline is not None:
        deadline = deadline * m
    return replace(item, arrival_round=position, offset=0, deadline_round=deadline)


def as_batch_item(item: DataItem, m: int) -> DataItem:
    """Inverse of :func:`as_stream_item`."""
    batch_round, offset = divmod(item.arrival_round - 1, m)
    deadline = item.deadline_round
    if deadline is not None:
        deadline = max(1, -(-deadline // m))
    return replace(item, arrival_round=batch_round + 1, offset=offset, deadline_round=deadline)


def request_deletion(item: DataItem, round_index: int, window: int) -> DataItem:
    """Attach a removal request made at ``round_index``.

    The item must be gone within ``window`` rounds of the request; pass
    ``window=m`` for streaming stamps and ``window=1`` for batched stamps.
    """
    deadline = round_index + window - 1
    if item.deadline_round is not None:
        deadline = min(deadline, item.deadline_round)
    return replace(item, deadline_round=deadline)


def items_matrix(items: Sequence[DataItem]) -> np.ndarray:
    if not items:
        raise ValueError("cannot build a matrix from zero items")
    return np.array([it.values for it in items], dtype=float)


def items_labels(items: Sequence[DataItem]) -> np.ndarray:
    labels = [it.label for it in items]
    if any(lbl is None for lbl in labels):
        raise ValueError("items without labels do not belong to a regression stream")
    return np.array(labels, dtype=float)


def squared_distance(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return math.fsum(float(x) ** 2 for x in (a - b))


@dataclass(frozen=True)
class SampleState:
    items: tuple[DataItem, ...] = ()
    segments: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        if self.segments is None:
            return
        segments = tuple((int(a), int(b)) for a, b in self.segments)
        n = len(self.items)
        end = 0
        for start, stop in sorted(segments):
            if start < end or not 0 <= start <= stop <= n:
                raise ValueError(f"segments must be disjoint ranges inside [0, {n}], got {segments}")
            end = stop
        object.__setattr__(self, "segments", segments)

    def __len__(self) -> int:
        return len(self.items)

    def is_empty(self) -> bool:
        return not self.items

    def matrix(self) -> np.ndarray:
        return items_matrix(self.items)

    def mean(self) -> np.ndarray:
        if not self.items:
            raise ValueError("average of an empty state is undefined")
        return self.matrix().mean(axis=0)

    def segment(self, index: int) -> tuple[DataItem, ...]:
        if self.segments is None:
            raise ValueError("state is not partitioned into segments")
        start, stop = self.segments[index]
        return self.items[start:stop]

    def to_dict(self) -> dict:
        return {
            "items": [it.to_dict() for it in self.items],
            "segments": None if self.segments is None else [list(s) for s in self.segments],
        }

    @classmethod
    def from_dict(cls, data: dict) -> SampleState:
        segments = data.get("segments")
        return cls(
            items=tuple(DataItem.from_dict(it) for it in data.get("items", [])),
            segments=None if segments is None else tuple((s[0], s[1]) for s in segments),
        )

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json_line(cls, line: str) -> SampleState:
        return cls.from_dict(json.loads(line))


@dataclass(frozen=True)
class GroupedState:
    """Regression state: one ordered item list per coordinate, in groups of k."""

    per_coordinate: tuple[tuple[DataItem, ...], ...]
    k: int

    def __post_init__(self) -> None:
        lists = tuple(tuple(items) for items in self.per_coordinate)
        for i, items in enumerate(lists):
            if len(items) % self.k:
                raise ValueError(f"coordinate {i} holds {len(items)} items, not a multiple of k={self.k}")
        object.__setattr__(self, "per_coordinate", lists)

    @property
    def total_items(self) -> int:
        return sum(len(items) for items in self.per_coordinate)

    def as_sample_state(self) -> SampleState:
        items: list[DataItem] = []
        segments: list[tuple[int, int]] = []
        for coordinate_items in self.per_coordinate:
            segments.append((len(items), len(items) + len(coordinate_items)))
            items.extend(coordinate_items)
        return SampleState(items=tuple(items), segments=tuple(segments))

    @classmethod
    def from_sample_state(cls, state: SampleState, k: int) -> GroupedState:
        if state.segments is None:
            raise ValueError("regression state needs per-coordinate segments")
        return cls(
            per_coordinate=tuple(state.segment(i) for i in range(len(state.segments))),
            k=k,
        )


@dataclass(frozen=True, eq=False)
class MeanEstRound:
    """Realized quantities of one encode round.

    For mean estimation ``z_t = s_prev + eta * (y_t - s_prev)``. For regression
    ``y_t`` holds the raw gradient term XᵀY − XᵀX·s_prev and
    ``z_t = s_prev + eta * y_t``.
    """

    t: int
    s_prev: np.ndarray
    y_t: np.ndarray
    z_t: np.ndarray
    eta: float
    chosen: tuple[SubsetChoice, ...]
    encoding_error: float
    engine: str = "exact"
    fallback: bool = False
    singular_groups: int = 0


@dataclass(frozen=True)
class RunResult:
    algorithm: str
    seed: int
    T: int
    m: int
    d: int
    estimate: tuple[float, ...]
    squared_error: float
    per_round_encoding_error: tuple[float, ...] = ()
    compliance_ok: bool = True
    k: int | None = None
    engine: str = ""
    fallback_rounds: int = 0
    singular_groups: int = 0
    worst_case_pred_error: float | None = None
    compliance: ComplianceReport | None = field(default=None, compare=False)

    @property
    def max_encoding_error(self) -> float:
        return max(self.per_round_encoding_error, default=0.0)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "T": self.T,
            "m": self.m,
            "d": self.d,
            "k": self.k,
            "engine": self.engine,
            "estimate": list(self.estimate),
            "squared_error": self.squared_error,
            "per_round_encoding_error": list(self.per_round_encoding_error),
            "compliance_ok": self.compliance_ok,
            "fallback_rounds": self.fallback_rounds,
            "singular_groups": self.singular_groups,
        }
        if self.worst_case_pred_error is not None:
            d["worst_case_pred_error"] = self.worst_case_pred_error
        if self.compliance is not None:
            d["compliance"] = self.compliance.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> RunResult:
        from ..recency.compliance import ComplianceReport

        compliance = data.get("compliance")
        return cls(
            algorithm=data.get("algorithm", ""),
            seed=data.get("seed", 0),
            T=data.get("T", 0),
            m=data.get("m", 0),
            d=data.get("d", 0),
            k=data.get("k"),
            engine=data.get("engine", ""),
            estimate=tuple(data.get("estimate", ())),
            squared_error=data.get("squared_error", 0.0),
            per_round_encoding_error=tuple(data.get("per_round_encoding_error", ())),
            compliance_ok=data.get("compliance_ok", True),
            fallback_rounds=data.get("fallback_rounds", 0),
            singular_groups=data.get("singular_groups", 0),
            worst_case_pred_error=data.get("worst_case_pred_error"),
            compliance=None if compliance is None else ComplianceReport.from_dict(compliance),
        )

    def to_json_line(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))
