"""
Parser for `key = value` run configuration files.

Lines starting with `#` and blank lines are ignored, values containing commas
become lists, and dotted keys (`apc.hidden_size = 64`) address nested sections.
The result is validated by the pydantic model of the command being run.
"""

import logging
import typing
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Type, TypeVar

from pydantic import BaseModel, ValidationError

from ..errors import ConfigError, MissingInputError, ParseError

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)


class ConfigFileParser:
    """Reads config files and `key=value` overrides into nested dictionaries."""

    def parse_file(self, path: str) -> Dict[str, Any]:
        file_path = Path(path)
        if not file_path.is_file():
            raise MissingInputError(f"Config file not found: {file_path}")
        try:
            text = file_path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"Config file is not UTF-8: {exc.reason}", exc.start, str(file_path)) from exc
        return self.parse_text(text, str(file_path))

    def parse_text(self, text: str, source: str = "<config>") -> Dict[str, Any]:
        values: Dict[str, Any] = {}
        for number, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{source} line {number}: expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ParseError(f"{source} line {number}: empty key")
            self._assign(values, key, self._convert(value))
        return values

    def parse_overrides(self, overrides: Iterable[str], base: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        values = base if base is not None else {}
        for override in overrides:
            if "=" not in override:
                raise ConfigError(f"Override {override!r} is not key=value")
            key, value = (part.strip() for part in override.split("=", 1))
            self._assign(values, key, self._convert(value))
        return values

    def _convert(self, value: str) -> Any:
        if "," in value:
            return [item.strip() for item in value.split(",") if item.strip()]
        return value

    def _assign(self, values: Dict[str, Any], key: str, value: Any) -> None:
        *sections, leaf = key.split(".")
        target = values
        for section in sections:
            node = target.setdefault(section, {})
            if not isinstance(node, dict):
                raise ConfigError(f"Key {key!r} nests under scalar {section!r}")
            target = node
        target[leaf] = value


def _is_list(annotation: Any) -> bool:
    return typing.get_origin(annotation) in (list, typing.List)


def _coerce_lists(model_cls: Type[BaseModel], values: Dict[str, Any]) -> Dict[str, Any]:
    """Wrap scalar values of list-typed fields and recurse into nested models."""
    result = dict(values)
    for name, field in model_cls.model_fields.items():
        if name not in result:
            continue
        annotation = field.annotation
        if _is_list(annotation) and not isinstance(result[name], list):
            result[name] = [result[name]]
        elif isinstance(annotation, type) and issubclass(annotation, BaseModel) and isinstance(result[name], dict):
            result[name] = _coerce_lists(annotation, result[name])
    return result


def build_config(model_cls: Type[ModelT], values: Dict[str, Any]) -> ModelT:
    """Validate raw values against model_cls; unknown keys are rejected."""
    try:
        return model_cls.model_validate(_coerce_lists(model_cls, values))
    except ValidationError as exc:
        problems = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors())
        raise ConfigError(f"Invalid {model_cls.__name__}: {problems}") from exc


def load_config(
    model_cls: Type[ModelT], path: Optional[str] = None, overrides: Iterable[str] = ()
) -> ModelT:
    """File values (if any) with overrides applied on top, validated."""
    parser = ConfigFileParser()
    values = parser.parse_file(path) if path else {}
    values = parser.parse_overrides(overrides, values)
    config = build_config(model_cls, values)
    logger.debug("Loaded %s from %s", model_cls.__name__, path or "defaults")
    return config
