"""Type-directed conversion between frozen dataclasses and JSON-ready values.

Decoding is strict: unknown keys and missing required fields raise
``CodecError`` with a dotted location. Mappings with non-string keys are
written as lists of ``[key, value]`` pairs.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import typing
from functools import lru_cache
from typing import Any, Mapping, Union

import numpy as np


class CodecError(ValueError):
    def __init__(self, message: str, location: str = "") -> None:
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


@lru_cache(maxsize=None)
def _hints(cls: type) -> dict[str, Any]:
    return typing.get_type_hints(cls)


def _origin(hint: Any) -> Any:
    return typing.get_origin(hint)


def encode(obj: Any, hint: Any = None) -> Any:
    if obj is None:
        return None
    custom = getattr(obj, "to_json", None)
    if callable(custom):
        return custom()
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        hints = _hints(type(obj))
        return {f.name: encode(getattr(obj, f.name), hints.get(f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, bool) or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return float(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    args = typing.get_args(hint) if hint is not None else ()
    if isinstance(obj, Mapping):
        key_hint, val_hint = (args + (None, None))[:2] if args else (None, None)
        if key_hint is str or (key_hint is None and all(isinstance(k, str) for k in obj)):
            return {k: encode(v, val_hint) for k, v in obj.items()}
        return [[encode(k, key_hint), encode(v, val_hint)] for k, v in obj.items()]
    if isinstance(obj, (set, frozenset)):
        item = args[0] if args else None
        return sorted((encode(x, item) for x in obj), key=lambda v: json.dumps(v, sort_keys=True))
    if isinstance(obj, (list, tuple)):
        if args and len(args) == 2 and args[1] is Ellipsis:
            return [encode(x, args[0]) for x in obj]
        if args and _origin(hint) is tuple and len(args) == len(obj):
            return [encode(x, h) for x, h in zip(obj, args)]
        item = args[0] if args else None
        return [encode(x, item) for x in obj]
    raise CodecError(f"cannot encode value of type {type(obj).__name__}")


def decode(hint: Any, data: Any, location: str = "$") -> Any:
    if hint is Any:
        return data
    origin = _origin(hint)
    if origin is Union:
        args = typing.get_args(hint)
        if data is None and type(None) in args:
            return None
        errors = []
        for a in args:
            if a is type(None):
                continue
            try:
                return decode(a, data, location)
            except CodecError as exc:
                errors.append(str(exc))
        raise CodecError("; ".join(errors) or "no union member matched", location)
    if isinstance(hint, type):
        custom = getattr(hint, "from_json", None)
        if custom is not None and callable(custom):
            try:
                return custom(data)
            except CodecError:
                raise
            except (TypeError, ValueError, KeyError) as exc:
                raise CodecError(str(exc), location) from exc
        if dataclasses.is_dataclass(hint):
            return _decode_dataclass(hint, data, location)
        if issubclass(hint, enum.Enum):
            try:
                return hint(data)
            except ValueError as exc:
                allowed = ", ".join(str(m.value) for m in hint)
                raise CodecError(f"{data!r} is not one of {allowed}", location) from exc
        if hint is bool:
            if not isinstance(data, bool):
                raise CodecError(f"expected boolean, got {type(data).__name__}", location)
            return data
        if hint is int:
            if isinstance(data, bool) or not isinstance(data, int):
                raise CodecError(f"expected integer, got {type(data).__name__}", location)
            return data
        if hint is float:
            if isinstance(data, bool) or not isinstance(data, (int, float)):
                raise CodecError(f"expected number, got {type(data).__name__}", location)
            return float(data)
        if hint is str:
            if not isinstance(data, str):
                raise CodecError(f"expected string, got {type(data).__name__}", location)
            return data
    args = typing.get_args(hint)
    if origin in (dict, Mapping, typing.Mapping) or (origin is not None and origin.__name__ == "Mapping"):
        key_hint, val_hint = args
        if key_hint is str:
            if not isinstance(data, dict):
                raise CodecError("expected object", location)
            return {decode(str, k, location): decode(val_hint, v, f"{location}.{k}") for k, v in data.items()}
        if isinstance(data, dict) and not data:
            return {}
        if not isinstance(data, list):
            raise CodecError("expected list of [key, value] pairs", location)
        out = {}
        for i, pair in enumerate(data):
            if not isinstance(pair, list) or len(pair) != 2:
                raise CodecError("expected [key, value] pair", f"{location}[{i}]")
            out[decode(key_hint, pair[0], f"{location}[{i}][0]")] = decode(val_hint, pair[1], f"{location}[{i}][1]")
        return out
    if origin is tuple:
        if not isinstance(data, list):
            raise CodecError("expected list", location)
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(decode(args[0], x, f"{location}[{i}]") for i, x in enumerate(data))
        if len(args) != len(data):
            raise CodecError(f"expected {len(args)} items, got {len(data)}", location)
        return tuple(decode(h, x, f"{location}[{i}]") for i, (h, x) in enumerate(zip(args, data)))
    if origin is list:
        if not isinstance(data, list):
            raise CodecError("expected list", location)
        return [decode(args[0], x, f"{location}[{i}]") for i, x in enumerate(data)]
    if origin is frozenset:
        if not isinstance(data, list):
            raise CodecError("expected list", location)
        return frozenset(decode(args[0], x, f"{location}[{i}]") for i, x in enumerate(data))
    raise CodecError(f"unsupported type hint {hint!r}", location)


def _decode_dataclass(cls: type, data: Any, location: str) -> Any:
    if not isinstance(data, dict):
        raise CodecError(f"expected object for {cls.__name__}", location)
    hints = _hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise CodecError(f"unknown field(s) {', '.join(unknown)}", location)
    kwargs = {}
    for f in dataclasses.fields(cls):
        if f.name not in data:
            if f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING:
                raise CodecError(f"missing field '{f.name}'", location)
            continue
        kwargs[f.name] = decode(hints[f.name], data[f.name], f"{location}.{f.name}")
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise CodecError(str(exc), location) from exc


def dumps(value: Any, hint: Any = None) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(encode(value, hint), sort_keys=True, indent=2, allow_nan=False) + "\n"


def loads(hint: Any, text: str) -> Any:
    return decode(hint, json.loads(text))
