"""Shared domain types and their structural validators."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional

import numpy as np

from .geometry import Box3, Rect, footprint, normalize_yaw

__all__ = [
    "Act",
    "Behaviour",
    "Bounds",
    "CharacterProfile",
    "Clip",
    "ClipRef",
    "DialogueLine",
    "Gender",
    "MotionCatalog",
    "MotionEntry",
    "ObjectKind",
    "OccupancyGrid",
    "PlacedScene",
    "Pose",
    "Relation",
    "SceneGraph",
    "SceneObject",
    "Screenplay",
    "SpatialRelation",
    "State",
    "Violation",
    "normalize_yaw",
    "validate_scene_graph",
    "validate_screenplay",
]

SECONDS_PER_LINE = 2.0


class State(str, enum.Enum):
    STANDING = "standing"
    SITTING = "sitting"


class Gender(str, enum.Enum):
    FEMALE = "female"
    MALE = "male"
    OTHER = "other"
    UNSPECIFIED = "unspecified"


class ObjectKind(str, enum.Enum):
    ANCHOR = "anchor"
    NON_ANCHOR = "non_anchor"
    ORNAMENT = "ornament"


class Relation(str, enum.Enum):
    ADJACENT = "adjacent"
    ON_TOP_OF = "on_top_of"
    FACING = "facing"
    LEFT_OF = "left_of"
    RIGHT_OF = "right_of"
    IN_FRONT_OF = "in_front_of"
    BEHIND = "behind"


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str
    detail: str


# --------------------------------------------------------------------------
# Screenplay
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CharacterProfile:
    name: str
    age: int
    gender: Gender
    occupation: str = ""
    traits: str = ""
    speaking_style: str = ""


@dataclass(frozen=True)
class DialogueLine:
    speaker: str
    text: str


@dataclass(frozen=True)
class Clip:
    index: int
    lines: tuple[DialogueLine, ...]
    duration: Optional[float] = None

    def __post_init__(self) -> None:
        if self.duration is None:
            object.__setattr__(self, "duration", SECONDS_PER_LINE * max(len(self.lines), 1))

    @property
    def speakers(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for line in self.lines:
            seen.setdefault(line.speaker, None)
        return tuple(seen)


@dataclass(frozen=True)
class Act:
    index: int
    sub_topic: str
    participants: tuple[str, ...]
    scene_description: str
    plot: str
    dialogue_goal: str
    clips: tuple[Clip, ...] = ()


@dataclass(frozen=True)
class Screenplay:
    idea: str
    profiles: tuple[CharacterProfile, ...]
    acts: tuple[Act, ...]

    def profile(self, name: str) -> CharacterProfile:
        for p in self.profiles:
            if p.name == name:
                return p
        raise KeyError(name)

    def clip_refs(self) -> list["ClipRef"]:
        return [ClipRef(a.index, c.index) for a in self.acts for c in a.clips]


@dataclass(frozen=True, order=True)
class ClipRef:
    act: int
    clip: int

    def __str__(self) -> str:
        return f"A{self.act}C{self.clip}"


def validate_screenplay(s: Screenplay) -> list[Violation]:
    out: list[Violation] = []
    names = [p.name for p in s.profiles]
    for name, n in Counter(names).items():
        if n > 1:
            out.append(Violation("profiles.name", "unique", f"duplicate profile name {name!r}"))
    for p in s.profiles:
        if p.age <= 0:
            out.append(Violation(f"profiles[{p.name}].age", "positive", f"age {p.age} must be > 0"))
    known = set(names)
    for i, act in enumerate(s.acts):
        where = f"acts[{i}]"
        if act.index != i + 1:
            out.append(Violation(f"{where}.index", "contiguous", f"expected act index {i + 1}, got {act.index}"))
        if not act.participants:
            out.append(Violation(f"{where}.participants", "nonempty", "act has no participants"))
        for name in act.participants:
            if name not in known:
                out.append(Violation(f"{where}.participants", "declared", f"participant {name!r} has no profile"))
        for j, clip in enumerate(act.clips):
            cw = f"{where}.clips[{j}]"
            if not clip.lines:
                out.append(Violation(f"{cw}.lines", "nonempty", "clip has no dialogue lines"))
            if clip.duration is None or not math.isfinite(clip.duration) or clip.duration <= 0:
                out.append(Violation(f"{cw}.duration", "positive_finite", f"duration {clip.duration!r}"))
            for speaker in clip.speakers:
                if speaker not in act.participants:
                    out.append(
                        Violation(f"{cw}.lines", "speaker_participant", f"speaker {speaker!r} is not a participant")
                    )
                    if speaker not in known:
                        out.append(Violation(f"{cw}.lines", "declared", f"speaker {speaker!r} has no profile"))
    return out


# --------------------------------------------------------------------------
# Scene graph and placement
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SceneObject:
    id: str
    label: str
    kind: ObjectKind
    dims: tuple[float, float, float]
    sittable: Optional[bool] = None

    @property
    def is_anchor(self) -> bool:
        return self.kind is ObjectKind.ANCHOR


@dataclass(frozen=True)
class SpatialRelation:
    subject: str
    relation: Relation
    object: str


@dataclass(frozen=True)
class SceneGraph:
    objects: tuple[SceneObject, ...]
    relations: tuple[SpatialRelation, ...] = ()

    def object(self, oid: str) -> SceneObject:
        for o in self.objects:
            if o.id == oid:
                return o
        raise KeyError(oid)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.objects)

    def support_of(self, oid: str) -> Optional[str]:
        for r in self.relations:
            if r.subject == oid and r.relation is Relation.ON_TOP_OF:
                return r.object
        return None

    def relations_of(self, oid: str) -> list[SpatialRelation]:
        return [r for r in self.relations if r.subject == oid or r.object == oid]


def validate_scene_graph(g: SceneGraph) -> list[Violation]:
    out: list[Violation] = []
    kinds: dict[str, ObjectKind] = {}
    for o in g.objects:
        if o.id in kinds:
            out.append(Violation("objects.id", "unique", f"duplicate object id {o.id!r}"))
        kinds[o.id] = o.kind
        if len(o.dims) != 3 or any(not (math.isfinite(d) and d > 0) for d in o.dims):
            out.append(Violation(f"objects[{o.id}].dims", "positive", f"dims {o.dims} must all be > 0"))
    supports: Counter[str] = Counter()
    for r in g.relations:
        text = f"{r.subject} {r.relation.value} {r.object}"
        missing = [x for x in (r.subject, r.object) if x not in kinds]
        if missing:
            out.append(Violation("relations", "endpoint_exists", f"relation '{text}' references missing id {missing[0]!r}"))
            continue
        if r.subject == r.object:
            out.append(Violation("relations", "no_self_relation", f"relation '{text}' relates an object to itself"))
            continue
        if r.relation is Relation.ON_TOP_OF:
            if kinds[r.object] is not ObjectKind.ANCHOR:
                out.append(Violation("relations", "support_is_anchor", f"relation '{text}' targets a non-anchor"))
            elif kinds[r.subject] is ObjectKind.ANCHOR:
                out.append(Violation("relations", "anchor_on_floor", f"relation '{text}' stacks an anchor"))
            supports[r.subject] += 1
    for oid, n in supports.items():
        if n > 1:
            out.append(Violation("relations", "single_support", f"{oid!r} has {n} on_top_of relations"))
    return out


@dataclass(frozen=True)
class Bounds:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def depth(self) -> float:
        return self.y_max - self.y_min

    @property
    def rect(self) -> Rect:
        return Rect(self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains(self, p, eps: float = 1e-9) -> bool:
        return self.rect.contains_point(p, eps)


class OccupancyGrid:
    """M x N boolean grid; ``True`` marks an occupied cell.

    Row ``r`` spans ``y`` in ``[oy + r*cs, oy + (r+1)*cs]`` and column ``c``
    spans ``x`` likewise. Instances are read-only; mutators return copies.
    """

    __slots__ = ("origin", "cell_size", "cells")

    def __init__(self, origin: tuple[float, float], cell_size: float, cells: np.ndarray) -> None:
        cells = np.array(cells, dtype=bool)
        if cells.ndim != 2 or cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ValueError("grid needs at least one row and one column")
        if not (cell_size > 0 and math.isfinite(cell_size)):
            raise ValueError("cell_size must be > 0")
        cells.setflags(write=False)
        object.__setattr__(self, "origin", (float(origin[0]), float(origin[1])))
        object.__setattr__(self, "cell_size", float(cell_size))
        object.__setattr__(self, "cells", cells)

    def __setattr__(self, name, value):
        raise AttributeError("OccupancyGrid is immutable")

    @classmethod
    def empty(cls, origin: tuple[float, float], cell_size: float, rows: int, cols: int) -> "OccupancyGrid":
        return cls(origin, cell_size, np.zeros((rows, cols), dtype=bool))

    @property
    def rows(self) -> int:
        return int(self.cells.shape[0])

    @property
    def cols(self) -> int:
        return int(self.cells.shape[1])

    @property
    def extent(self) -> Rect:
        ox, oy = self.origin
        return Rect(ox, oy, ox + self.cols * self.cell_size, oy + self.rows * self.cell_size)

    def cell_center(self, r: int, c: int) -> tuple[float, float]:
        ox, oy = self.origin
        return (ox + (c + 0.5) * self.cell_size, oy + (r + 0.5) * self.cell_size)

    def cell_rect(self, r: int, c: int) -> Rect:
        ox, oy = self.origin
        cs = self.cell_size
        return Rect(ox + c * cs, oy + r * cs, ox + (c + 1) * cs, oy + (r + 1) * cs)

    def cell_of(self, p) -> tuple[int, int]:
        ox, oy = self.origin
        c = math.floor(round((p[0] - ox) / self.cell_size, 9))
        r = math.floor(round((p[1] - oy) / self.cell_size, 9))
        return (min(max(r, 0), self.rows - 1), min(max(c, 0), self.cols - 1))

    def in_grid(self, r: int, c: int) -> bool:
        return 0 <= r < self.rows and 0 <= c < self.cols

    def with_block(self, r: int, c: int, kr: int, kc: int, value: bool = True) -> "OccupancyGrid":
        cells = self.cells.copy()
        cells[r : r + kr, c : c + kc] = value
        return OccupancyGrid(self.origin, self.cell_size, cells)

    def with_cells(self, cells: np.ndarray) -> "OccupancyGrid":
        return OccupancyGrid(self.origin, self.cell_size, cells)

    @property
    def free_count(self) -> int:
        return int((~self.cells).sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return (
            self.origin == other.origin
            and self.cell_size == other.cell_size
            and self.cells.shape == other.cells.shape
            and bool(np.array_equal(self.cells, other.cells))
        )

    def __hash__(self) -> int:
        return hash((self.origin, self.cell_size, self.cells.shape, self.cells.tobytes()))

    def __repr__(self) -> str:
        return f"OccupancyGrid(origin={self.origin}, cell_size={self.cell_size}, shape={self.cells.shape}, occupied={int(self.cells.sum())})"

    def to_json(self) -> dict:
        return {
            "origin": list(self.origin),
            "cell_size": self.cell_size,
            "rows": self.rows,
            "cols": self.cols,
            "cells": ["".join("1" if v else "0" for v in row) for row in self.cells],
        }

    @classmethod
    def from_json(cls, data: Mapping) -> "OccupancyGrid":
        extra = set(data) - {"origin", "cell_size", "rows", "cols", "cells"}
        if extra:
            raise ValueError(f"unknown field(s) {', '.join(sorted(extra))}")
        rows, cols = int(data["rows"]), int(data["cols"])
        text = data["cells"]
        if len(text) != rows or any(len(row) != cols or set(row) - {"0", "1"} for row in text):
            raise ValueError("cells do not match rows/cols")
        cells = np.array([[ch == "1" for ch in row] for row in text], dtype=bool).reshape(rows, cols)
        return cls((float(data["origin"][0]), float(data["origin"][1])), float(data["cell_size"]), cells)


@dataclass(frozen=True)
class Pose:
    position: tuple[float, float]
    yaw: float
    support_height: float = 0.0


@dataclass(frozen=True)
class PlacedScene:
    bounds: Bounds
    scene_graph: SceneGraph
    poses: Mapping[str, Pose]
    floor_grid: OccupancyGrid
    top_grids: Mapping[str, OccupancyGrid] = field(default_factory=dict)

    def footprint(self, oid: str) -> Rect:
        pose = self.poses[oid]
        return footprint(pose.position, pose.yaw, self.scene_graph.object(oid).dims)

    def box(self, oid: str) -> Box3:
        pose = self.poses[oid]
        h = self.scene_graph.object(oid).dims[2]
        return Box3.from_rect(self.footprint(oid), pose.support_height, pose.support_height + h)

    def placed_ids(self) -> list[str]:
        return [o.id for o in self.scene_graph.objects if o.id in self.poses]

    def boxes(self) -> list[tuple[str, Box3]]:
        return [(oid, self.box(oid)) for oid in self.placed_ids()]

    def footprints(self) -> list[tuple[str, Rect]]:
        return [(oid, self.footprint(oid)) for oid in self.placed_ids()]

    def floor_ids(self) -> list[str]:
        return [oid for oid in self.placed_ids() if self.scene_graph.support_of(oid) is None]

    def with_updates(self, **changes) -> "PlacedScene":
        return replace(self, **changes)


# --------------------------------------------------------------------------
# Behaviour and motion
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Behaviour:
    character: str
    start_state: State
    start_pos: tuple[float, float]
    start_facing: float
    end_state: State
    end_pos: tuple[float, float]
    end_facing: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "start_facing", normalize_yaw(self.start_facing))
        object.__setattr__(self, "end_facing", normalize_yaw(self.end_facing))

    @classmethod
    def still(cls, character: str, state: State, pos: tuple[float, float], facing: float) -> "Behaviour":
        return cls(character, state, pos, facing, state, pos, facing)

    def poses(self) -> tuple[tuple[str, State, tuple[float, float], float], ...]:
        return (
            ("start", self.start_state, self.start_pos, self.start_facing),
            ("end", self.end_state, self.end_pos, self.end_facing),
        )


@dataclass(frozen=True)
class MotionEntry:
    name: str
    state_compat: frozenset[State]
    tags: str = ""

    def __post_init__(self) -> None:
        if not self.state_compat:
            raise ValueError(f"motion {self.name!r} has empty state_compat")


@dataclass(frozen=True)
class MotionCatalog:
    entries: Mapping[int, MotionEntry]

    def compatible(self, state: State) -> list[int]:
        return sorted(mid for mid, e in self.entries.items() if state in e.state_compat)

    def is_compatible(self, motion_id: int, state: State) -> bool:
        e = self.entries.get(motion_id)
        return e is not None and state in e.state_compat

    def by_name(self, name: str) -> Optional[int]:
        for mid in sorted(self.entries):
            if self.entries[mid].name.lower() == name.lower():
                return mid
        return None


def unique(items: Iterable[str]) -> list[str]:
    return list(dict.fromkeys(items))


# --------------------------------------------------------------------------
# Camera shots
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotParams:
    """Template parameters. Enumerated values are checked against the
    template's schema, so they are kept as plain strings here."""

    subjects: tuple[str, ...]
    relation: Optional[str] = None
    framing: Optional[str] = None
    shot_size: Optional[str] = None
    angle: Optional[str] = None
    start_elev: Optional[str] = None
    end_elev: Optional[str] = None
    ease: Optional[str] = None
    azimuth_offset: float = 0.0


@dataclass(frozen=True)
class ShotSample:
    t: float
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]
    vertical_fov: float


@dataclass(frozen=True)
class ShotTrack:
    samples: tuple[ShotSample, ...]

    def __post_init__(self) -> None:
        if not self.samples:
            raise ValueError("shot track needs at least one sample")
        ts = [s.t for s in self.samples]
        if ts[0] != 0.0 or any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("sample times must start at 0 and strictly increase")

    @property
    def duration(self) -> float:
        return self.samples[-1].t


@dataclass(frozen=True)
class ValidationReport:
    collision: bool
    first_collision_sample: Optional[int]
    occlusion_ratio: float
    framing_ok: bool
    occluded_samples: tuple[int, ...] = ()
    unframed_samples: tuple[int, ...] = ()

    @property
    def passed(self) -> bool:
        return (not self.collision) and self.occlusion_ratio == 0.0 and self.framing_ok


@dataclass(frozen=True)
class ShotPlan:
    clip: ClipRef
    template_type: str
    params: ShotParams
    track: ShotTrack
    report: ValidationReport
    rationale: str = ""
    fallback: bool = False
    unsafe: bool = False
    validation_attempts: int = 0
