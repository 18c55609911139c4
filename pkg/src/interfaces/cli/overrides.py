"""
Dotted-path overrides for configuration documents (`--set tree.k=8`).
"""
import json
from typing import Any, Dict, Iterable

from ...shared.exceptions import ConfigurationException


def parse_value(text: str) -> Any:
    """JSON literal when it parses, the raw string otherwise."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(document: Dict[str, Any], overrides: Iterable[str]) -> Dict[str, Any]:
    """Return a copy of `document` with every `path=value` assignment applied.

    Intermediate objects are created when missing; the result is validated
    later by the pydantic model it feeds, so unknown keys fail there.
    """
    result = json.loads(json.dumps(document))
    for item in overrides:
        path, separator, text = item.partition("=")
        if not separator or not path.strip():
            raise ConfigurationException(f"Override must look like path=value, got '{item}'")
        keys = path.strip().split(".")
        target = result
        for key in keys[:-1]:
            child = target.setdefault(key, {})
            if not isinstance(child, dict):
                raise ConfigurationException(f"Cannot descend into '{key}' of override '{item}'")
            target = child
        target[keys[-1]] = parse_value(text)
    return result
