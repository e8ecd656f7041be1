from __future__ import annotations

import logging
from typing import Sequence

from ..core.errors import ConfigError, EngineBudgetError
from .base import Norm, SubsetChoice, SubsetEngine
from .exact import ChunkedEngine, ExactEngine
from .greedy import GreedyEngine
from .mitm import MitmEngine

logger = logging.getLogger(__name__)

# Engines a run configuration may name; "chunked" is reached only as a fallback.
SELECTABLE_ENGINES = ("exact", "mitm", "greedy")


class EngineRegistry:
    def __init__(self) -> None:
        self._engines: dict[str, SubsetEngine] = {}

    def register(self, engine: SubsetEngine) -> None:
        self._engines[engine.name] = engine
        logger.debug("Registered subset engine: %s", engine.name)

    def get(self, name: str) -> SubsetEngine:
        engine = self._engines.get(name)
        if engine is None:
            raise ConfigError(f"unknown subset engine: {name}")
        return engine

    def resolve(self, name: str, n: int, d: int, allow_fallback: bool = False) -> tuple[SubsetEngine, bool]:
        """Pick the engine for ``n`` candidates of dimension ``d``.

        Returns ``(engine, fallback)``; ``fallback`` is True when the result is
        no longer guaranteed to be the global optimum.
        """
        engine = self.get(name)
        if engine.scalar_only and d != 1:
            engine = self.get("exact")
        if engine.accepts(n, d):
            return engine, False
        mitm = self.get("mitm")
        if mitm.accepts(n, d):
            return mitm, False
        if not allow_fallback:
            raise EngineBudgetError(
                f"{n} candidates exceed the {engine.name} engine budget ({engine.budget}) and fallback is disabled"
            )
        fallback = self.get("greedy") if d == 1 else self.get("chunked")
        logger.warning("Falling back to %s search for %d candidates (d=%d)", fallback.name, n, d)
        return fallback, True

    def search(
        self,
        name: str,
        candidates: Sequence,
        target,
        norm: Norm | str = "l2",
        allow_fallback: bool = False,
    ) -> tuple[SubsetChoice, str, bool]:
        first = candidates[0] if len(candidates) else 0.0
        d = 1 if isinstance(first, (int, float)) else len(first)
        engine, fallback = self.resolve(name, len(candidates), d, allow_fallback)
        return engine.search(candidates, target, norm), engine.name, fallback


def default_registry() -> EngineRegistry:
    registry = EngineRegistry()
    registry.register(ExactEngine())
    registry.register(MitmEngine())
    registry.register(GreedyEngine())
    registry.register(ChunkedEngine())
    return registry
