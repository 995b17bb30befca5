"""
Config file loading and flag overrides shared by the commands
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional

from app.core.exceptions import ConfigError
from app.schemas.config import TrainConfig


def load_config(path: Optional[Path]) -> TrainConfig:
    """TrainConfig from a JSON file; defaults when no path is given"""
    if path is None:
        return TrainConfig()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return TrainConfig.model_validate(raw)


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(
    config: TrainConfig,
    fields: Dict[str, Any],
    assignments: Optional[List[str]] = None,
) -> TrainConfig:
    """
    Re-validate config with explicit flag values on top.

    fields holds top-level keys (None means "flag not given"); assignments
    are dotted KEY=VALUE strings with JSON values, e.g. data.classes=3.
    """

    data = config.model_dump(mode="json")
    for key, value in fields.items():
        if value is not None:
            data[key] = value

    for assignment in assignments or []:
        key, sep, text = assignment.partition("=")
        if not sep or not key:
            raise ConfigError(f"--set expects KEY=VALUE, got '{assignment}'")
        *parents, leaf = key.strip().split(".")
        node = data
        for part in parents:
            child = node.get(part)
            if not isinstance(child, dict):
                raise ConfigError(f"--set: '{key}' does not name a nested config field")
            node = child
        node[leaf] = _parse_value(text.strip())

    return TrainConfig.model_validate(data)


def parse_int_list(text: str, name: str) -> List[int]:
    """'0,1,2' -> [0, 1, 2]"""
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"{name}: expected comma-separated integers, got '{text}'") from exc
    if not values:
        raise ConfigError(f"{name}: no values given")
    return values
