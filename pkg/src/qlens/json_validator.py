"""JSON coercion for tool arguments and projection payloads (dicts, JSON strings, files)."""

import json
from pathlib import Path
from typing import Annotated, Any, Optional, Union

from pydantic import BeforeValidator


def json_or_dict_validator(v: Union[dict, str, None]) -> Optional[dict]:
    """
    Coerce a tool argument (projection payload or run config) to a dictionary.

    Raises:
        ValueError: for a string that is not a JSON object
        TypeError: for anything other than a dict, a string or None
    """
    if v is None:
        return None
    if isinstance(v, dict):
        return v
    if isinstance(v, str):
        try:
            parsed = json.loads(v)
        except json.JSONDecodeError as e:
            raise ValueError(f"Invalid JSON string: {e}") from e
        if not isinstance(parsed, dict):
            raise ValueError(f"JSON string must parse to a dictionary, got {type(parsed).__name__}")
        return parsed
    raise TypeError(f"Expected dict, JSON string, or None; got {type(v).__name__}")


def load_json_source(source: Union[dict, str, Path]) -> dict[str, Any]:
    """A dict from a dict, a JSON object string or the path of a JSON file."""
    is_text = isinstance(source, str) and source.lstrip().startswith("{")
    if isinstance(source, Path) or (isinstance(source, str) and not is_text):
        path = Path(source)
        if not path.is_file():
            raise ValueError(f"No such JSON file: {path}")
        source = path.read_text(encoding="utf-8")
    result = json_or_dict_validator(source)
    if result is None:
        raise ValueError("Expected a JSON object, got None")
    return result


# Type alias that converts JSON strings to dicts during validation
JsonDict = Annotated[Optional[dict], BeforeValidator(json_or_dict_validator)]
