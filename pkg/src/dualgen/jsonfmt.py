"""Byte-stable JSON with fixed decimal places for selected numbers."""

from __future__ import annotations

import json
from dataclasses import dataclass


@dataclass(frozen=True)
class Fixed:
    """A float that serializes with exactly ``places`` decimals."""

    value: float
    places: int


def _encode(obj) -> str:
    if isinstance(obj, Fixed):
        text = f"{obj.value:.{obj.places}f}"
        # avoid "-0.000"
        if text.lstrip("-").strip("0.") == "":
            text = text.lstrip("-")
        return text
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    return json.dumps(obj, ensure_ascii=False)


def dumps(obj) -> str:
    """Serialize ``obj`` preserving dict insertion order; ``Fixed`` values keep their precision."""
    return _encode(obj)
