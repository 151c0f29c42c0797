"""Evaluation metrics over layouts, blocking, motions and shots.

Every metric returns a ratio in [0, 1]. The report keeps a field as None when
its inputs were not supplied.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, fields
from typing import Iterable, Literal, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import ndimage

from .behaviour import BehaviourPlan
from .camera import CameraConstants, CameraRegistry, first_collision, key_subjects, occluded_samples
from .layout import occupancy_from_footprints
from .locomotion import CHARACTER_RADIUS, inflate
from .model import Behaviour, ClipRef, MotionCatalog, PlacedScene, ShotPlan, State, Violation
from .regions import (
    RegionLossParams,
    VisibilityCamera,
    default_cameras,
    enumerate_candidates,
    loss_from_terms,
    boundary_distance,
    mean_visibility,
    obstacle_distance,
    score_candidates,
    visibility_ratio,
)

REACH_DISTANCE = 0.5


class MisalignedClips(ValueError):
    pass


class NoCandidates(ValueError):
    pass


# --------------------------------------------------------------------------
# Annotations
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MotionAnnotation:
    character: str
    motion_id: int
    state: Optional[State] = None
    reason: str = ""


@dataclass(frozen=True)
class CameraAnnotation:
    type: str
    subjects: tuple[str, ...]
    specs: Mapping[str, str]
    reason: str = ""


@dataclass(frozen=True)
class ClipAnnotation:
    motions: tuple[MotionAnnotation, ...] = ()
    camera: Optional[CameraAnnotation] = None
    motion_reason: str = ""


@dataclass(frozen=True)
class AnnotationSet:
    clips: Mapping[ClipRef, ClipAnnotation]

    def validate(self, catalog: Optional[MotionCatalog] = None, refs: Optional[Iterable[ClipRef]] = None) -> list[Violation]:
        out = []
        known = set(refs) if refs is not None else None
        for ref, ann in sorted(self.clips.items()):
            if known is not None and ref not in known:
                out.append(Violation(f"clips[{ref}]", "clip_exists", f"clip {ref} is not in the screenplay"))
            if catalog is not None:
                for m in ann.motions:
                    if m.motion_id not in catalog.entries:
                        out.append(
                            Violation(f"clips[{ref}].motions", "motion_exists", f"unknown motion id {m.motion_id}")
                        )
        return out


# --------------------------------------------------------------------------
# Layout
# --------------------------------------------------------------------------


def _collides(placed: PlacedScene, a: str, b: str) -> bool:
    """Interiors overlap in plan and in height; an object resting on another only touches it."""
    ba, bb = placed.box(a), placed.box(b)
    if not placed.footprint(a).overlaps(placed.footprint(b)):
        return False
    return min(ba.z1, bb.z1) - max(ba.z0, bb.z0) > 1e-9


def object_collision_rate(placed: PlacedScene, mode: Literal["objects", "pairs"] = "objects") -> float:
    ids = placed.placed_ids()
    pairs = [(a, b) for i, a in enumerate(ids) for b in ids[i + 1 :]]
    hits = [(a, b) for a, b in pairs if _collides(placed, a, b)]
    if mode == "pairs":
        return len(hits) / len(pairs) if pairs else 0.0
    if mode != "objects":
        raise ValueError(f"unknown collision mode {mode!r}")
    involved = {x for pair in hits for x in pair}
    return len(involved) / len(ids) if ids else 0.0


def walkable_component(placed: PlacedScene, radius: float = CHARACTER_RADIUS) -> np.ndarray:
    """Mask of the largest 4-connected free region after growing obstacles by ``radius``.

    Floor objects are rasterised from their footprints and merged with the
    floor grid, so hand-built rooms need not keep the grid in sync. Among
    equally large components the one met first in row-major order wins.
    """
    grid = placed.floor_grid
    rects = [placed.footprint(oid) for oid in placed.floor_ids()]
    blocked = inflate(grid.cells | occupancy_from_footprints(grid, rects), grid.cell_size, radius)
    labels, n = ndimage.label(~blocked)
    if n == 0:
        return np.zeros(blocked.shape, dtype=bool)
    sizes = np.bincount(labels.ravel())[1:]
    return labels == int(np.argmax(sizes)) + 1


def walkability(placed: PlacedScene, character_radius: float = CHARACTER_RADIUS) -> tuple[float, float]:
    """(walk, reach). Reach is 1.0 when the scene has no anchors."""
    grid = placed.floor_grid
    comp = walkable_component(placed, character_radius)
    walk = float(comp.sum()) / comp.size
    anchors = [o.id for o in placed.scene_graph.objects if o.is_anchor and o.id in placed.poses]
    if not anchors:
        return walk, 1.0
    rows, cols = np.nonzero(comp)
    ox, oy = grid.origin
    cs = grid.cell_size
    xs = ox + (cols + 0.5) * cs
    ys = oy + (rows + 0.5) * cs
    reached = 0
    for oid in anchors:
        r = placed.footprint(oid)
        dx = np.maximum(np.maximum(r.x0 - xs, 0.0), xs - r.x1)
        dy = np.maximum(np.maximum(r.y0 - ys, 0.0), ys - r.y1)
        if xs.size and bool((np.sqrt(dx * dx + dy * dy) <= REACH_DISTANCE + 1e-9).any()):
            reached += 1
    return walk, reached / len(anchors)


# --------------------------------------------------------------------------
# Blocking
# --------------------------------------------------------------------------


def pose_loss(
    pos: Sequence[float], placed: PlacedScene, p: RegionLossParams, cams: Sequence[VisibilityCamera]
) -> float:
    s_bar = mean_visibility([visibility_ratio(pos, cam, placed) for cam in cams])
    return loss_from_terms(boundary_distance(placed.bounds, pos), obstacle_distance(placed, pos), s_bar, p)


def blocking_loss_norm(
    behaviours: Iterable[Behaviour],
    placed: PlacedScene,
    params: Optional[RegionLossParams] = None,
    cams: Optional[Sequence[VisibilityCamera]] = None,
) -> float:
    """Mean min-max normalised loss of the standing poses.

    Both the start and the end pose of a behaviour count when standing.
    Values are clipped to [0, 1] because a pose off the candidate lattice
    can fall outside the candidates' loss range.
    """
    p = params or RegionLossParams()
    cams = default_cameras(placed.bounds) if cams is None else cams
    poses = []
    for b in behaviours:
        for _, state, pos, _ in b.poses():
            if state is State.STANDING:
                poses.append(pos)
    if not poses:
        raise ValueError("no standing poses to score")
    scored = score_candidates(enumerate_candidates(placed, p), p, placed, cams)
    if not scored:
        raise NoCandidates("the scene has no free performing-region candidates")
    losses = [c.loss for c in scored]
    lo, hi = min(losses), max(losses)
    if hi - lo <= 0.0:
        return 0.0
    vals = [min(1.0, max(0.0, (pose_loss(q, placed, p, cams) - lo) / (hi - lo))) for q in poses]
    return sum(vals) / len(vals)


# --------------------------------------------------------------------------
# Motions
# --------------------------------------------------------------------------


def motion_accuracy(plan: BehaviourPlan, annotations: AnnotationSet) -> float:
    hits = total = 0
    for ref, ann in sorted(annotations.clips.items()):
        if not ann.motions:
            continue
        if ref not in plan.motions:
            raise MisalignedClips(f"annotated clip {ref} is missing from the plan")
        chosen = plan.motions[ref]
        for m in ann.motions:
            if m.character not in chosen:
                raise MisalignedClips(f"clip {ref}: no planned motion for annotated character {m.character!r}")
            total += 1
            hits += chosen[m.character] == m.motion_id
    if total == 0:
        raise MisalignedClips("annotations contain no motion assignments")
    return hits / total


def motion_diversity(motions: Union[BehaviourPlan, Iterable[int]]) -> float:
    """Shannon entropy of the motion histogram divided by log2 of the distinct count."""
    ids = motions.motion_ids() if isinstance(motions, BehaviourPlan) else list(motions)
    if not ids:
        raise ValueError("no motion assignments")
    counts = Counter(ids)
    n = len(counts)
    if n == 1:
        return 0.0
    if len(set(counts.values())) == 1:
        return 1.0
    total = len(ids)
    h = -sum((c / total) * math.log2(c / total) for c in counts.values())
    return min(1.0, h / math.log2(n))


# --------------------------------------------------------------------------
# Camera
# --------------------------------------------------------------------------


def camera_collision_rate(plans: Sequence[ShotPlan], placed: PlacedScene, consts: CameraConstants) -> float:
    if not plans:
        return 0.0
    bad = sum(first_collision(pl.track, placed, consts.collision_margin) is not None for pl in plans)
    return bad / len(plans)


def occlusion_rate(
    plans: Sequence[ShotPlan],
    behaviours: Mapping[ClipRef, Mapping[str, Behaviour]],
    placed: PlacedScene,
    registry: CameraRegistry,
    v_min: Optional[float] = None,
) -> float:
    """Share of all track samples in which some key subject is hidden."""
    v = registry.constants.v_min if v_min is None else v_min
    hidden = total = 0
    for pl in plans:
        if pl.clip not in behaviours:
            raise MisalignedClips(f"no behaviours for shot clip {pl.clip}")
        cast = behaviours[pl.clip]
        keys = key_subjects(registry.get(pl.template_type), pl.params)
        hidden += len(occluded_samples(pl.track, placed, [cast[s] for s in keys], v))
        total += len(pl.track.samples)
    return hidden / total if total else 0.0


def _norm(v: Optional[str]) -> Optional[str]:
    return v.lower() if isinstance(v, str) else v


def camera_template_accuracy(plans: Sequence[ShotPlan], annotations: AnnotationSet, strict: bool = False) -> float:
    """Share of annotated clips whose planned template type matches.

    ``strict`` also demands that every annotated parameter value match the plan's
    parameter of the same name (case-insensitive).
    """
    by_clip = {pl.clip: pl for pl in plans}
    hits = total = 0
    for ref, ann in sorted(annotations.clips.items()):
        if ann.camera is None:
            continue
        pl = by_clip.get(ref)
        if pl is None:
            raise MisalignedClips(f"annotated clip {ref} has no shot plan")
        total += 1
        ok = pl.template_type == ann.camera.type
        if ok and strict:
            ok = all(_norm(getattr(pl.params, k, None)) == _norm(v) for k, v in ann.camera.specs.items())
        hits += ok
    if total == 0:
        raise MisalignedClips("annotations contain no camera labels")
    return hits / total


# --------------------------------------------------------------------------
# Report
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsReport:
    object_collision_rate: Optional[float] = None
    walk: Optional[float] = None
    reach: Optional[float] = None
    blocking_loss_norm: Optional[float] = None
    motion_accuracy: Optional[float] = None
    motion_diversity: Optional[float] = None
    camera_collision_rate: Optional[float] = None
    occlusion_rate: Optional[float] = None
    camera_accuracy: Optional[float] = None

    def __post_init__(self) -> None:
        for f in fields(self):
            v = getattr(self, f.name)
            if v is not None and not (0.0 <= v <= 1.0):
                raise ValueError(f"{f.name}={v} outside [0, 1]")

    def present(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self) if getattr(self, f.name) is not None}


def compute_report(
    placed: Optional[PlacedScene] = None,
    behaviour_plan: Optional[BehaviourPlan] = None,
    shots: Optional[Sequence[ShotPlan]] = None,
    annotations: Optional[AnnotationSet] = None,
    *,
    registry: Optional[CameraRegistry] = None,
    region_params: Optional[RegionLossParams] = None,
) -> MetricsReport:
    """Every metric whose inputs are available."""
    vals: dict[str, float] = {}
    if placed is not None:
        vals["object_collision_rate"] = object_collision_rate(placed)
        vals["walk"], vals["reach"] = walkability(placed)
    if behaviour_plan is not None:
        ids = behaviour_plan.motion_ids()
        if ids:
            vals["motion_diversity"] = motion_diversity(ids)
        if placed is not None:
            standing = [b for b in behaviour_plan.behaviours() if State.STANDING in (b.start_state, b.end_state)]
            if standing:
                try:
                    vals["blocking_loss_norm"] = blocking_loss_norm(standing, placed, region_params)
                except NoCandidates:
                    pass
        if annotations is not None and any(a.motions for a in annotations.clips.values()):
            vals["motion_accuracy"] = motion_accuracy(behaviour_plan, annotations)
    if shots is not None and placed is not None and registry is not None:
        vals["camera_collision_rate"] = camera_collision_rate(shots, placed, registry.constants)
        if behaviour_plan is not None:
            vals["occlusion_rate"] = occlusion_rate(shots, behaviour_plan.clips, placed, registry)
    if shots is not None and annotations is not None and any(a.camera for a in annotations.clips.values()):
        vals["camera_accuracy"] = camera_template_accuracy(shots, annotations)
    return MetricsReport(**vals)
