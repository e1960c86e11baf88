"""
Run-config files: one `dotted.key = value` per line, `#` comments, blank lines ignored.

    model.kind = wave1d
    model.damping.support = 0.2:0.5
    feedback.name = power
    feedback.p = 3
"""
import logging
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

from pydantic import ValidationError

from decaylab.core.errors import ConfigError
from decaylab.schemas.config import RunConfig

logger = logging.getLogger(__name__)


def parse_lines(text: str, source: str = "<config>") -> Dict[str, str]:
    flat: Dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{number}: expected 'key = value', got '{raw.strip()}'")
        if key in flat:
            raise ConfigError(f"{source}:{number}: duplicate key", field=key)
        flat[key] = value.strip()
    return flat


def nest(flat: Mapping[str, Any]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = key.split(".")
        node = tree
        for depth, part in enumerate(parts[:-1]):
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError("is both a value and a section", field=".".join(parts[: depth + 1]))
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise ConfigError("is both a value and a section", field=key)
        node[parts[-1]] = value
    return tree


def _field_path(tree: Mapping[str, Any], loc) -> str:
    """Dotted config key of a validation error, without pydantic's union/list markers."""
    parts = []
    node: Any = tree
    for part in loc:
        if not isinstance(node, Mapping) or isinstance(part, int):
            break
        parts.append(str(part))
        node = node.get(part)
    return ".".join(parts)


def validate(flat: Mapping[str, Any]) -> RunConfig:
    tree = nest(flat)
    # so a missing feedback section reports the field it needs
    tree.setdefault("feedback", {})
    try:
        return RunConfig.model_validate(tree)
    except ValidationError as exc:
        first = exc.errors()[0]
        raise ConfigError(first["msg"], field=_field_path(tree, first["loc"]) or None)


def load_config(path: Union[str, Path], overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found", field="--config")
    flat: Dict[str, Any] = parse_lines(path.read_text(), source=str(path))
    for key, value in (overrides or {}).items():
        if value is not None:
            flat[key] = value
    config = validate(flat)
    logger.debug("loaded %s (%d keys)", path, len(flat))
    return config
