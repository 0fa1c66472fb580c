"""Strict JSON document reading shared by the taxonomy and battery formats.

Documents are plain JSON objects with fixed field names. Unknown fields are
errors, not warnings: battery and taxonomy files are hand-edited, and a
silently dropped field would corrupt a rubric. Errors carry a location
string ("items[2].id", or "line 4 column 7" for syntax errors) so an author
can find the offending spot.
"""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class ParseError:
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


class ParseFailure(ValueError):
    """Raised when a document cannot be read; carries all collected errors."""

    def __init__(self, errors: list[ParseError]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


class Reader:
    """Collects ParseErrors while pulling typed fields out of JSON objects."""

    def __init__(self) -> None:
        self.errors: list[ParseError] = []

    def fail(self, loc: str, message: str) -> None:
        self.errors.append(ParseError(loc, message))

    def check_keys(self, obj: dict, loc: str, allowed: set[str]) -> None:
        for key in obj:
            if key not in allowed:
                self.fail(f"{loc}.{key}" if loc else key, "unknown field")

    def obj(self, value, loc: str) -> dict | None:
        if not isinstance(value, dict):
            self.fail(loc, f"expected object, got {type(value).__name__}")
            return None
        return value

    def str_(self, obj: dict, key: str, loc: str, required: bool = True,
             default: str | None = None) -> str | None:
        if key not in obj:
            if required:
                self.fail(f"{loc}.{key}", "missing required field")
            return default
        value = obj[key]
        if not isinstance(value, str):
            self.fail(f"{loc}.{key}", f"expected string, got {type(value).__name__}")
            return default
        return value

    def int_(self, obj: dict, key: str, loc: str, required: bool = True,
             default: int | None = None) -> int | None:
        if key not in obj:
            if required:
                self.fail(f"{loc}.{key}", "missing required field")
            return default
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"{loc}.{key}", f"expected integer, got {type(value).__name__}")
            return default
        return value

    def num(self, obj: dict, key: str, loc: str, required: bool = True,
            default: float | None = None) -> float | None:
        if key not in obj:
            if required:
                self.fail(f"{loc}.{key}", "missing required field")
            return default
        value = obj[key]
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"{loc}.{key}", f"expected number, got {type(value).__name__}")
            return default
        return float(value)

    def bool_(self, obj: dict, key: str, loc: str, required: bool = True,
              default: bool | None = None) -> bool | None:
        if key not in obj:
            if required:
                self.fail(f"{loc}.{key}", "missing required field")
            return default
        value = obj[key]
        if not isinstance(value, bool):
            self.fail(f"{loc}.{key}", f"expected boolean, got {type(value).__name__}")
            return default
        return value

    def list_(self, obj: dict, key: str, loc: str, required: bool = True) -> list | None:
        if key not in obj:
            if required:
                self.fail(f"{loc}.{key}", "missing required field")
            return None
        value = obj[key]
        if not isinstance(value, list):
            self.fail(f"{loc}.{key}", f"expected array, got {type(value).__name__}")
            return None
        return value

    def enum(self, obj: dict, key: str, loc: str, choices: tuple[str, ...],
             required: bool = True, default: str | None = None) -> str | None:
        value = self.str_(obj, key, loc, required=required, default=default)
        if value is not None and value not in choices:
            self.fail(f"{loc}.{key}", f"must be one of {', '.join(choices)}; got {value!r}")
            return default
        return value

    def str_list(self, obj: dict, key: str, loc: str, required: bool = True) -> list[str] | None:
        raw = self.list_(obj, key, loc, required=required)
        if raw is None:
            return None
        out: list[str] = []
        for i, item in enumerate(raw):
            if not isinstance(item, str):
                self.fail(f"{loc}.{key}[{i}]", "expected string")
            else:
                out.append(item)
        return out

    def raise_if_failed(self) -> None:
        if self.errors:
            raise ParseFailure(self.errors)


def load_json_document(document: bytes | str) -> dict:
    """Decode UTF-8 JSON; syntax problems raise ParseFailure with line info."""
    if isinstance(document, bytes):
        try:
            document = document.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseFailure([ParseError("document", f"not valid UTF-8: {exc}")]) from exc
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        loc = f"line {exc.lineno} column {exc.colno}"
        raise ParseFailure([ParseError(loc, exc.msg)]) from exc
    if not isinstance(data, dict):
        raise ParseFailure([ParseError("document", "top level must be a JSON object")])
    return data
