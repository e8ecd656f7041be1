from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..core.errors import ConfigError
from ..version import APP_VERSION

from .models import RunConfig, SweepSpec

logger = logging.getLogger(__name__)

_CONFIG_DIR = Path(__file__).resolve().parent.parent.parent / "config"
_DEFAULT_CONFIG_PATH = _CONFIG_DIR / "default_config.json"
EXAMPLES_DIR = _CONFIG_DIR / "examples"

# Keys of an example envelope in config/examples/*.json
_ENVELOPE_KEYS = frozenset({"version", "description", "command", "config"})


@dataclass(frozen=True)
class ExampleDocument:
    name: str
    description: str
    command: str
    path: Path


def read_json(path: Path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return data


def unwrap_example(data: dict) -> dict:
    """Return the config payload of an example envelope, or ``data`` unchanged."""
    if "config" in data and set(data) <= _ENVELOPE_KEYS:
        payload = data["config"]
        if not isinstance(payload, dict):
            raise ConfigError("example envelope 'config' must be an object")
        return payload
    return data


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to a temporary sibling, then move it over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp_path.write_text(text, encoding="utf-8", newline="")
        shutil.move(str(tmp_path), str(path))
    except Exception:
        if tmp_path.exists():
            tmp_path.unlink()
        raise
    logger.info("Wrote %s", path)


class ConfigManager:
    """Resolves a run configuration from its layered sources.

    Order, later wins: built-in defaults, ``config/default_config.json``,
    the ``--config`` document, the ``--dist`` distribution document, CLI flags.
    """

    def __init__(self, default_path: Path | None = None) -> None:
        self._default_path = _DEFAULT_CONFIG_PATH if default_path is None else Path(default_path)
        self._layers: list[str] = []

    @property
    def layers(self) -> list[str]:
        """Sources merged by the most recent call, in order."""
        return list(self._layers)

    def _defaults(self) -> dict:
        self._layers = ["built-in"]
        merged = RunConfig().to_dict()
        if self._default_path.exists():
            data = read_json(self._default_path)
            data.pop("app_version", None)
            merged.update(data)
            self._layers.append(str(self._default_path))
        return merged

    def load_run(
        self,
        config_path: Path | None = None,
        dist_path: Path | None = None,
        overrides: dict[str, Any] | None = None,
    ) -> RunConfig:
        merged = self._defaults()
        if config_path is not None:
            document = unwrap_example(read_json(config_path))
            document.pop("app_version", None)
            merged.update(document)
            if "d" in document and "distribution" not in document:
                merged.pop("distribution", None)
            self._layers.append(str(config_path))
        if dist_path is not None:
            merged["distribution"] = unwrap_example(read_json(dist_path))
            self._layers.append(str(dist_path))
        if overrides:
            applied = {key: value for key, value in overrides.items() if value is not None}
            merged.update(applied)
            if applied:
                self._layers.append("command line")
        config = RunConfig.from_dict(merged)
        logger.debug("Run config resolved from %s", " -> ".join(self._layers))
        return config

    def load_sweep(self, path: Path, overrides: dict[str, Any] | None = None) -> SweepSpec:
        data = unwrap_example(read_json(path))
        base = self._defaults()
        base.update(data.get("base", {}))
        if overrides:
            base.update({key: value for key, value in overrides.items() if value is not None})
        data = {**data, "base": base}
        self._layers.append(str(path))
        return SweepSpec.from_dict(data)

    @staticmethod
    def save(config: RunConfig | SweepSpec, path: Path) -> None:
        data = {"app_version": APP_VERSION, **config.to_dict()} if isinstance(config, RunConfig) else config.to_dict()
        write_atomic(path, json.dumps(data, indent=2, ensure_ascii=False) + "\n")

    @staticmethod
    def list_examples(examples_dir: Path = EXAMPLES_DIR) -> list[ExampleDocument]:
        examples: list[ExampleDocument] = []
        if not examples_dir.is_dir():
            return examples
        for json_file in sorted(examples_dir.glob("*.json")):
            try:
                data = read_json(json_file)
            except ConfigError:
                logger.warning("Failed to read example file: %s", json_file)
                continue
            examples.append(ExampleDocument(
                name=json_file.stem,
                description=data.get("description", ""),
                command=data.get("command", ""),
                path=json_file,
            ))
        return examples
