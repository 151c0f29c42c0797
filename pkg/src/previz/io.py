"""Versioned artifact files.

Each file is one JSON object carrying ``schema_version`` and ``kind`` next to
the encoded fields of its value. Output is canonical (sorted keys, fixed
indent) so identical values give identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Union

from .agents.protocols import MessageKind, Transcript, TranscriptEntry
from .behaviour import BehaviourPlan
from .codec import CodecError, decode, encode
from .metrics import AnnotationSet, MetricsReport
from .model import Bounds, MotionCatalog, MotionEntry, PlacedScene, SceneGraph, Screenplay, ShotPlan, State
from .regions import FunctionalMap

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    """Room bounds, the scene graph, and optional per-object sittable overrides."""

    bounds: Bounds
    graph: SceneGraph
    sittable_hints: Mapping[str, bool] = field(default_factory=dict)


@dataclass(frozen=True)
class ShotPlanSet:
    plans: tuple[ShotPlan, ...]


KINDS: dict[str, Any] = {
    "screenplay": Screenplay,
    "scene_graph": SceneSpec,
    "placed_scene": PlacedScene,
    "functional_map": FunctionalMap,
    "behaviour_plan": BehaviourPlan,
    "shot_plans": ShotPlanSet,
    "annotations": AnnotationSet,
    "metrics": MetricsReport,
}


def _envelope(data: Any, kind: str, where: str) -> dict:
    if not isinstance(data, dict):
        raise SchemaError(f"{where}: expected a JSON object")
    version = data.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{where}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    if data.get("kind") != kind:
        raise SchemaError(f"{where}: expected kind {kind!r}, found {data.get('kind')!r}")
    return {k: v for k, v in data.items() if k not in ("schema_version", "kind")}


def _text(body: Mapping[str, Any], kind: str) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, **body}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def dumps_artifact(kind: str, value: Any) -> str:
    if kind == "transcript":
        return _text({"entries": value.to_json()}, kind)
    if kind == "motion_catalog":
        return _text({"motions": _catalog_rows(value)}, kind)
    hint = KINDS[kind]
    body = encode(value, hint)
    if not isinstance(body, dict):
        raise SchemaError(f"{kind} did not encode to an object")
    return _text(body, kind)


def loads_artifact(text: str, kind: str, where: str = "<text>") -> Any:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{where}: invalid JSON ({exc.msg}, line {exc.lineno})") from exc
    body = _envelope(data, kind, where)
    try:
        if kind == "transcript":
            return _transcript(body)
        if kind == "motion_catalog":
            return _catalog(body)
        return decode(KINDS[kind], body)
    except CodecError as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def write_artifact(path: Union[str, Path], kind: str, value: Any) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(dumps_artifact(kind, value))
    return p


def read_artifact(path: Union[str, Path], kind: str) -> Any:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise SchemaError(f"{p}: cannot read ({exc.strerror})") from exc
    return loads_artifact(text, kind, str(p))


# -- special formats -------------------------------------------------------


def _catalog_rows(cat: MotionCatalog) -> list[dict]:
    return [
        {"id": mid, "name": e.name, "state_compat": sorted(s.value for s in e.state_compat), "tags": e.tags}
        for mid, e in sorted(cat.entries.items())
    ]


def _catalog(body: Mapping[str, Any]) -> MotionCatalog:
    entries: dict[int, MotionEntry] = {}
    for row in body["motions"]:
        extra = set(row) - {"id", "name", "state_compat", "tags"}
        if extra:
            raise SchemaError(f"motion {row.get('id')}: unknown field(s) {', '.join(sorted(extra))}")
        mid = row["id"]
        if not isinstance(mid, int) or isinstance(mid, bool):
            raise SchemaError(f"motion id {mid!r} is not an integer")
        if mid in entries:
            raise SchemaError(f"duplicate motion id {mid}")
        entries[mid] = MotionEntry(row["name"], frozenset(State(s) for s in row["state_compat"]), row.get("tags", ""))
    return MotionCatalog(entries)


def _transcript(body: Mapping[str, Any]) -> Transcript:
    entries = [
        TranscriptEntry(e["round"], e["role"], MessageKind(e["kind"]), e["payload"], e["parsed"], e["loop"])
        for e in body["entries"]
    ]
    return Transcript(entries)


def load_motion_catalog(path: Optional[Union[str, Path]] = None) -> MotionCatalog:
    if path is None:
        text = resources.files("previz.data").joinpath("motion_catalog.json").read_text()
        return loads_artifact(text, "motion_catalog", "motion_catalog.json")
    return read_artifact(path, "motion_catalog")
