"""Character blocking, motion choice and locomotion for each clip.

Backends propose where characters are by naming region parcels, seat ids or
coordinates; every answer is snapped onto the functional map so the spatial
result is valid regardless of how loose the reply was. Proposals are then
discussed, revised and judged, motions are chosen against the catalog, and
each character's start-to-end move gets a grid path.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Collection, Mapping, Optional, Sequence

from .agents.backends import AgentBackend
from .agents.parsing import BlockingOut, FeedbackOut, JudgmentOut, MotionOut, PoseRef
from .agents.protocols import (
    LoopConfig,
    MessageKind,
    Role,
    RoleKind,
    Transcript,
    Verdict,
    ask,
    run_discuss_revise_judge,
)
from .geometry import Rect, angle_diff, bearing
from .locomotion import CHARACTER_RADIUS, NoPath, plan_locomotion
from .model import (
    Act,
    Behaviour,
    Bounds,
    CharacterProfile,
    Clip,
    ClipRef,
    MotionCatalog,
    PlacedScene,
    Screenplay,
    State,
)
from .regions import CandidateRegion, FunctionalMap, SeatSpot

MIN_CHARACTER_DISTANCE = 0.5
FACING_TOLERANCE = math.pi / 2.0
_TOL = 1e-6


class UnparseableOutput(ValueError):
    """A reply parsed but does not describe the clip it was asked about."""


class EmptyCatalog(ValueError):
    pass


class BlockingRule(str, enum.Enum):
    OFF_REGION = "off_region"
    OCCUPIED_SEAT = "occupied_seat"
    COLLISION = "collision"
    FACING_AWAY = "facing_away"
    OUT_OF_BOUNDS = "out_of_bounds"


@dataclass(frozen=True)
class BlockingViolation:
    clip: ClipRef
    character: str
    rule: BlockingRule
    detail: str


@dataclass(frozen=True)
class DetectedBox:
    object_id: str
    label: str
    footprint: Rect
    yaw: float


@dataclass(frozen=True)
class DetectionMap:
    bounds: Bounds
    boxes: tuple[DetectedBox, ...]


@dataclass(frozen=True)
class BehaviourPlan:
    clips: Mapping[ClipRef, Mapping[str, Behaviour]]
    motions: Mapping[ClipRef, Mapping[str, int]] = field(default_factory=dict)
    paths: Mapping[ClipRef, Mapping[str, tuple[tuple[float, float], ...]]] = field(default_factory=dict)
    best_effort: tuple[ClipRef, ...] = ()
    flags: tuple[str, ...] = ()

    def behaviours(self) -> list[Behaviour]:
        return [b for ref in sorted(self.clips) for _, b in sorted(self.clips[ref].items())]

    def motion_ids(self) -> list[int]:
        return [m for ref in sorted(self.motions) for _, m in sorted(self.motions[ref].items())]


def build_detection_map(placed: PlacedScene) -> DetectionMap:
    boxes = tuple(
        DetectedBox(oid, placed.scene_graph.object(oid).label, placed.footprint(oid), placed.poses[oid].yaw)
        for oid in placed.placed_ids()
    )
    return DetectionMap(placed.bounds, boxes)


def map_digest(dm: DetectionMap, fm: FunctionalMap) -> dict:
    """Compact text-friendly view of both top-view layers for prompts."""
    r3 = lambda v: round(float(v), 3)  # noqa: E731
    return {
        "bounds": [r3(dm.bounds.x_min), r3(dm.bounds.y_min), r3(dm.bounds.x_max), r3(dm.bounds.y_max)],
        "objects": [
            {
                "id": b.object_id,
                "label": b.label,
                "rect": [r3(b.footprint.x0), r3(b.footprint.y0), r3(b.footprint.x1), r3(b.footprint.y1)],
                "yaw": r3(b.yaw),
            }
            for b in dm.boxes
        ],
        "regions": [
            {"parcel": list(r.parcel_index), "center": [r3(r.center[0]), r3(r.center[1])], "loss": r3(r.loss or 0.0)}
            for r in fm.region_list()
        ],
        "seats": [
            {"id": s.object_id, "point": [r3(s.point[0]), r3(s.point[1])], "yaw": r3(s.yaw)} for s in fm.sittable_spots
        ],
    }


def clip_digest(clip: Clip) -> dict:
    return {
        "index": clip.index,
        "duration": clip.duration,
        "lines": [{"speaker": ln.speaker, "text": ln.text} for ln in clip.lines],
    }


def behaviour_digest(behaviours: Mapping[str, Behaviour]) -> dict:
    return {
        name: {
            "start_state": b.start_state.value,
            "start_pos": [round(b.start_pos[0], 3), round(b.start_pos[1], 3)],
            "start_facing": round(b.start_facing, 4),
            "end_state": b.end_state.value,
            "end_pos": [round(b.end_pos[0], 3), round(b.end_pos[1], 3)],
            "end_facing": round(b.end_facing, 4),
        }
        for name, b in sorted(behaviours.items())
    }


# --------------------------------------------------------------------------
# Addressees
# --------------------------------------------------------------------------


def addressees(clip: Clip, participants: Sequence[str]) -> dict[str, str]:
    """Who each character should face during the clip.

    A speaker faces the next different speaker (looking ahead, then back);
    with nobody else speaking, the first other participant. Listeners face
    the clip's first speaker. A lone character has no addressee.
    """
    out: dict[str, str] = {}
    speakers = [ln.speaker for ln in clip.lines]
    for name in participants:
        others = [p for p in participants if p != name]
        if not others:
            continue
        if name in speakers:
            i = speakers.index(name)
            after = [s for s in speakers[i + 1 :] if s != name and s in participants]
            before = [s for s in reversed(speakers[:i]) if s != name and s in participants]
            target = (after or before or others)[0]
        else:
            first = next((s for s in speakers if s in participants and s != name), None)
            target = first or others[0]
        out[name] = target
    return out


# --------------------------------------------------------------------------
# Resolving replies onto the map
# --------------------------------------------------------------------------


def _nearest_region(fm: FunctionalMap, p: Sequence[float], taken: set) -> Optional[CandidateRegion]:
    best = None
    best_d = math.inf
    for r in fm.region_list():
        if r.parcel_index in taken:
            continue
        d = math.dist(r.center, p)
        if d < best_d - 1e-12:
            best, best_d = r, d
    return best


def _nearest_seat(fm: FunctionalMap, p: Sequence[float], taken: set) -> Optional[SeatSpot]:
    best = None
    best_d = math.inf
    for s in fm.sittable_spots:
        if s.object_id in taken:
            continue
        d = math.dist(s.point, p)
        if d < best_d - 1e-12:
            best, best_d = s, d
    return best


@dataclass
class _Spot:
    state: State
    pos: tuple[float, float]
    facing: Optional[float]
    key: tuple  # ("region", parcel) or ("seat", id)


class _Resolver:
    def __init__(self, fm: FunctionalMap, bounds: Bounds) -> None:
        self.fm = fm
        self.bounds = bounds
        self.taken: set[tuple] = set()
        self.flags: list[str] = []

    def _region_spot(self, want: Sequence[float], name: str, reason: str = "") -> _Spot:
        taken = {k[1] for k in self.taken if k[0] == "region"}
        r = _nearest_region(self.fm, want, taken)
        if r is None:
            raise UnparseableOutput(f"no free performing region left for {name}")
        if reason:
            self.flags.append(f"{name}: {reason}, moved to region {list(r.parcel_index)}")
        key = ("region", r.parcel_index)
        self.taken.add(key)
        return _Spot(State.STANDING, r.center, None, key)

    def key_at(self, state: State, pos: Sequence[float]) -> tuple:
        if state is State.SITTING:
            for seat in self.fm.sittable_spots:
                if math.dist(seat.point, pos) <= _TOL:
                    return ("seat", seat.object_id)
        else:
            for r in self.fm.region_list():
                if math.dist(r.center, pos) <= _TOL:
                    return ("region", r.parcel_index)
        return ("free", tuple(pos))

    def resolve(self, name: str, ref: PoseRef) -> _Spot:
        regions = self.fm.standing_regions
        if ref.state is State.SITTING:
            seat = None
            if ref.seat is not None:
                try:
                    seat = self.fm.seat(ref.seat)
                except KeyError:
                    seat = None
            if seat is None:
                want = ref.pos or self.bounds.center
                seat = _nearest_seat(self.fm, want, set())
            if seat is None:
                return self._region_spot(ref.pos or self.bounds.center, name, "no seat available")
            key = ("seat", seat.object_id)
            if key in self.taken:
                return self._region_spot(seat.point, name, f"seat {seat.object_id} already occupied")
            self.taken.add(key)
            return _Spot(State.SITTING, seat.point, seat.yaw, key)
        if ref.region is not None and tuple(ref.region) in regions:
            r = regions[tuple(ref.region)]
            key = ("region", r.parcel_index)
            if key in self.taken:
                return self._region_spot(r.center, name, f"region {list(r.parcel_index)} already occupied")
            self.taken.add(key)
            return _Spot(State.STANDING, r.center, ref.facing, key)
        if ref.seat is not None:
            try:
                want = self.fm.seat(ref.seat).point
            except KeyError:
                want = self.bounds.center
        else:
            want = ref.pos or self.bounds.center
        spot = self._region_spot(want, name)
        spot.facing = ref.facing
        return spot


def _face(pos: Sequence[float], target: Optional[Sequence[float]], fallback: float) -> float:
    if target is None or math.dist(pos, target) < 1e-12:
        return fallback
    return bearing(pos, target)


def resolve_blocking(
    reply: BlockingOut,
    clip: Clip,
    participants: Sequence[str],
    fm: FunctionalMap,
    bounds: Bounds,
    previous: Optional[Mapping[str, Behaviour]] = None,
) -> tuple[dict[str, Behaviour], list[str]]:
    """Turn a parsed blocking reply into behaviours that sit on the map."""
    names = [e.character for e in reply.characters]
    extra = sorted(set(names) - set(participants))
    if extra:
        raise UnparseableOutput(f"reply names characters outside the clip: {', '.join(extra)}")
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise UnparseableOutput(f"reply repeats characters: {', '.join(dupes)}")
    missing = [p for p in participants if p not in names]
    if missing:
        raise UnparseableOutput(f"reply omits characters: {', '.join(missing)}")
    previous = previous or {}
    entries = {e.character: e for e in reply.characters}

    starts: dict[str, _Spot] = {}
    start_res = _Resolver(fm, bounds)
    for name in participants:
        if name in previous:
            b = previous[name]
            key = start_res.key_at(b.end_state, b.end_pos)
            start_res.taken.add(key)
            starts[name] = _Spot(b.end_state, b.end_pos, b.end_facing, key)
    for name in participants:
        if name not in starts:
            starts[name] = start_res.resolve(name, entries[name].start)

    end_res = _Resolver(fm, bounds)
    ends: dict[str, _Spot] = {}
    for name in participants:
        ref = entries[name].end
        if ref is None:
            s = starts[name]
            ends[name] = _Spot(s.state, s.pos, s.facing, s.key)
            end_res.taken.add(s.key)
    for name in participants:
        if name not in ends:
            ends[name] = end_res.resolve(name, entries[name].end)

    faces = addressees(clip, participants)
    out = {}
    for name in participants:
        s, e = starts[name], ends[name]
        tgt = faces.get(name)
        s_face = s.facing if s.facing is not None else _face(s.pos, starts[tgt].pos if tgt else None, 0.0)
        e_face = e.facing if e.facing is not None else _face(e.pos, ends[tgt].pos if tgt else None, s_face)
        out[name] = Behaviour(name, s.state, s.pos, s_face, e.state, e.pos, e_face)
    return out, start_res.flags + end_res.flags


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


def validate_blocking(
    clip_ref: ClipRef,
    clip: Clip,
    behaviours: Mapping[str, Behaviour],
    fm: FunctionalMap,
    placed: PlacedScene,
    carried: Collection[str] = (),
) -> list[BlockingViolation]:
    """Rule violations at the start and end poses.

    Characters in ``carried`` inherit their start pose from the previous
    clip, so their start facing is not held to this clip's addressees.
    """
    out: list[BlockingViolation] = []
    names = sorted(behaviours)
    faces = addressees(clip, names)
    seats = {s.object_id: s for s in fm.sittable_spots}
    rects = placed.footprints()

    def seat_at(pos: Sequence[float]) -> Optional[str]:
        for oid, s in seats.items():
            if math.dist(s.point, pos) <= _TOL:
                return oid
        return None

    for phase in ("start", "end"):
        used_seats: dict[str, str] = {}
        poses = {}
        for name in names:
            b = behaviours[name]
            state = b.start_state if phase == "start" else b.end_state
            pos = b.start_pos if phase == "start" else b.end_pos
            facing = b.start_facing if phase == "start" else b.end_facing
            poses[name] = (state, pos, facing)
            where = f"{phase} pose at ({pos[0]:.3f}, {pos[1]:.3f})"
            if not placed.bounds.contains(pos):
                out.append(BlockingViolation(clip_ref, name, BlockingRule.OUT_OF_BOUNDS, where))
                continue
            seat = seat_at(pos) if state is State.SITTING else None
            hits = [oid for oid, r in rects if oid != seat and r.contains_point(pos, -_TOL)]
            if hits:
                out.append(BlockingViolation(clip_ref, name, BlockingRule.COLLISION, f"{where} is inside {hits[0]}"))
            elif state is State.STANDING:
                if not any(r.footprint.contains_point(pos) for r in fm.region_list()):
                    out.append(BlockingViolation(clip_ref, name, BlockingRule.OFF_REGION, f"{where} is on no region"))
            elif seat is None:
                out.append(BlockingViolation(clip_ref, name, BlockingRule.OFF_REGION, f"{where} is on no seat"))
            if seat is not None:
                if seat in used_seats:
                    out.append(
                        BlockingViolation(
                            clip_ref, name, BlockingRule.OCCUPIED_SEAT, f"{phase}: seat {seat} taken by {used_seats[seat]}"
                        )
                    )
                else:
                    used_seats[seat] = name
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                (sa, pa, _), (sb, pb, _) = poses[a], poses[b]
                if sa is State.SITTING and sb is State.SITTING and seat_at(pa) is not None and seat_at(pa) == seat_at(pb):
                    continue
                d = math.dist(pa, pb)
                if d < MIN_CHARACTER_DISTANCE - 1e-9:
                    out.append(
                        BlockingViolation(clip_ref, b, BlockingRule.COLLISION, f"{phase}: {d:.3f} m from {a}")
                    )
        for name in names:
            tgt = faces.get(name)
            if tgt is None or tgt not in poses or (phase == "start" and name in carried):
                continue
            _, pos, facing = poses[name]
            _, tpos, _ = poses[tgt]
            if math.dist(pos, tpos) < 1e-12:
                continue
            off = angle_diff(facing, bearing(pos, tpos))
            if off > FACING_TOLERANCE + 1e-9:
                out.append(
                    BlockingViolation(
                        clip_ref, name, BlockingRule.FACING_AWAY, f"{phase}: {off:.3f} rad off the bearing to {tgt}"
                    )
                )
    return out


# --------------------------------------------------------------------------
# Backend-driven steps
# --------------------------------------------------------------------------


@dataclass
class ClipContext:
    ref: ClipRef
    clip: Clip
    act: Act
    profiles: tuple[CharacterProfile, ...]
    dm: DetectionMap
    fm: FunctionalMap
    placed: PlacedScene

    @property
    def participants(self) -> tuple[str, ...]:
        return self.act.participants

    def base_prompt(self) -> dict:
        return {
            "clip_ref": str(self.ref),
            "clip": clip_digest(self.clip),
            "act": {"index": self.act.index, "scene_description": self.act.scene_description, "plot": self.act.plot},
            "participants": list(self.participants),
            "profiles": [
                {"name": p.name, "traits": p.traits, "speaking_style": p.speaking_style}
                for p in self.profiles
                if p.name in self.participants
            ],
            "map": map_digest(self.dm, self.fm),
        }


D1 = Role(RoleKind.DIRECTOR, tag="D1")
D2 = Role(RoleKind.DIRECTOR, tag="D2")
CINEMATOGRAPHER = Role(RoleKind.CINEMATOGRAPHER)
SCENE_DESIGNER = Role(RoleKind.SCENE_DESIGNER)


def blocking_roles(participants: Sequence[str]) -> list[Role]:
    return [CINEMATOGRAPHER, SCENE_DESIGNER] + [Role(RoleKind.ACTOR, character_binding=n) for n in participants]


def propose_blocking(
    ctx: ClipContext,
    backend: AgentBackend,
    cfg: LoopConfig,
    transcript: Transcript,
    previous: Optional[Mapping[str, Behaviour]] = None,
    *,
    round: int = 0,
    notes: Sequence[tuple[str, str]] = (),
    current: Optional[Mapping[str, Behaviour]] = None,
    log_success: bool = True,
) -> tuple[dict[str, Behaviour], list[str]]:
    prompt = ctx.base_prompt()
    prompt["previous_end_poses"] = behaviour_digest(previous or {})
    if current is not None:
        prompt["current_plan"] = behaviour_digest(current)
    if notes:
        prompt["feedback"] = [{"role": r, "text": t} for r, t in notes]
    kind = MessageKind.DRAFT if round == 0 else MessageKind.REVISION
    reply = ask(backend, D1.label, prompt, "blocking", cfg, transcript, round, kind, log_success=log_success)
    behaviours, flags = resolve_blocking(reply, ctx.clip, ctx.participants, ctx.fm, ctx.placed.bounds, previous)
    if flags:
        # snapping corrections are part of the record, not just the plan
        transcript.add(round, "engine", MessageKind.FEEDBACK, json.dumps({"snapped": flags}))
    return behaviours, flags


@dataclass
class RefinedBlocking:
    behaviours: dict[str, Behaviour]
    approved: bool
    rounds: int
    violations: list[BlockingViolation]
    flags: list[str]

    @property
    def best_effort(self) -> bool:
        return not self.approved


def refine_blocking(
    ctx: ClipContext,
    initial: Mapping[str, Behaviour],
    backend: AgentBackend,
    cfg: LoopConfig,
    transcript: Transcript,
    previous: Optional[Mapping[str, Behaviour]] = None,
) -> RefinedBlocking:
    """Discuss, revise and judge the blocking of one clip.

    A director's approval only counts when the revision has no violations;
    otherwise the violations are appended to the director's notes.
    """
    flags: list[str] = []
    roles = blocking_roles(ctx.participants)

    def violations(plan: Mapping[str, Behaviour]) -> list[BlockingViolation]:
        return validate_blocking(ctx.ref, ctx.clip, plan, ctx.fm, ctx.placed, tuple(previous or ()))

    def feedback_fn(role: Role):
        def fn(plan: Mapping[str, Behaviour], t: int) -> str:
            prompt = ctx.base_prompt()
            prompt["current_plan"] = behaviour_digest(plan)
            prompt["violations"] = [f"{v.character}: {v.rule.value} ({v.detail})" for v in violations(plan)]
            if role.character_binding:
                prompt["character"] = role.character_binding
            reply: FeedbackOut = ask(
                backend, role.label, prompt, "feedback", cfg, transcript, t, MessageKind.FEEDBACK, log_success=False
            )
            return json.dumps(reply.model_dump(mode="json"), sort_keys=True)

        return fn

    def revise(plan: Mapping[str, Behaviour], notes: list[tuple[str, str]], t: int) -> dict[str, Behaviour]:
        out, f = propose_blocking(
            ctx, backend, cfg, transcript, previous, round=t, notes=notes, current=plan, log_success=False
        )
        flags.extend(f)
        return out

    def judge(plan: Mapping[str, Behaviour], t: int) -> Verdict:
        prompt = ctx.base_prompt()
        prompt["current_plan"] = behaviour_digest(plan)
        found = violations(plan)
        prompt["violations"] = [f"{v.character}: {v.rule.value} ({v.detail})" for v in found]
        reply: JudgmentOut = ask(
            backend, D2.label, prompt, "judgment", cfg, transcript, t, MessageKind.JUDGMENT, log_success=False
        )
        if found:
            extra = "; ".join(f"{v.character}: {v.rule.value}" for v in found)
            return Verdict(False, (reply.feedback + " | unresolved: " + extra).strip(" |"))
        return Verdict(reply.approve, reply.feedback)

    result = run_discuss_revise_judge(
        lambda: dict(initial),
        [(r.label, feedback_fn(r)) for r in roles],
        revise,
        judge,
        cfg,
        score=lambda plan: len(violations(plan)),
        transcript=transcript,
        judge_role=D2.label,
        drafter_role=D1.label,
        describe=lambda plan: json.dumps(behaviour_digest(plan), sort_keys=True),
    )
    best = result.artifact
    return RefinedBlocking(dict(best), result.approved, result.rounds, violations(best), flags)


def select_motion(
    ctx: ClipContext,
    behaviours: Mapping[str, Behaviour],
    catalog: MotionCatalog,
    backend: AgentBackend,
    cfg: LoopConfig,
    transcript: Transcript,
) -> tuple[dict[str, int], list[str], bool]:
    """Pick one catalog motion per character, compatible with its end state.

    Returns (choices, flags, approved). An incompatible or unknown id falls
    back to the lowest compatible id and is flagged.
    """
    if not catalog.entries:
        raise EmptyCatalog("motion catalog is empty")
    for b in behaviours.values():
        if not catalog.compatible(b.end_state):
            raise EmptyCatalog(f"no motion supports state {b.end_state.value}")
    flags: list[str] = []
    menu = [
        {"id": mid, "name": e.name, "states": sorted(s.value for s in e.state_compat), "tags": e.tags}
        for mid, e in sorted(catalog.entries.items())
    ]

    def prompt_for(current: Optional[Mapping[str, int]], notes: Sequence[tuple[str, str]]) -> dict:
        p = ctx.base_prompt()
        p.pop("map", None)
        p["behaviours"] = behaviour_digest(behaviours)
        p["catalog"] = menu
        if current is not None:
            p["current_choice"] = dict(sorted(current.items()))
        if notes:
            p["feedback"] = [{"role": r, "text": t} for r, t in notes]
        return p

    def normalise(reply: MotionOut) -> dict[str, int]:
        got = {}
        for ch in reply.choices:
            if ch.character not in behaviours:
                raise UnparseableOutput(f"motion reply names unknown character {ch.character!r}")
            got[ch.character] = ch.motion_id
        out = {}
        for name in sorted(behaviours):
            state = behaviours[name].end_state
            mid = got.get(name)
            if mid is None or not catalog.is_compatible(mid, state):
                fallback = catalog.compatible(state)[0]
                why = "no choice" if mid is None else f"id {mid} not usable while {state.value}"
                flags.append(f"{ctx.ref} {name}: {why}, using id {fallback}")
                mid = fallback
            out[name] = mid
        return out

    def draft() -> dict[str, int]:
        reply = ask(backend, D1.label, prompt_for(None, ()), "motion", cfg, transcript, 0, MessageKind.DRAFT, log_success=False)
        return normalise(reply)

    def revise(cur: dict[str, int], notes: list[tuple[str, str]], t: int) -> dict[str, int]:
        reply = ask(backend, D1.label, prompt_for(cur, notes), "motion", cfg, transcript, t, MessageKind.REVISION, log_success=False)
        return normalise(reply)

    def actor_feedback(name: str):
        def fn(cur: dict[str, int], t: int) -> str:
            p = prompt_for(cur, ())
            p["character"] = name
            reply = ask(backend, f"actor:{name}", p, "feedback", cfg, transcript, t, MessageKind.FEEDBACK, log_success=False)
            return json.dumps(reply.model_dump(mode="json"), sort_keys=True)

        return fn

    def judge(cur: dict[str, int], t: int) -> Verdict:
        reply = ask(backend, D2.label, prompt_for(cur, ()), "judgment", cfg, transcript, t, MessageKind.JUDGMENT, log_success=False)
        return Verdict(reply.approve, reply.feedback)

    result = run_discuss_revise_judge(
        draft,
        [(f"actor:{n}", actor_feedback(n)) for n in sorted(behaviours)],
        revise,
        judge,
        cfg,
        transcript=transcript,
        judge_role=D2.label,
        drafter_role=D1.label,
        describe=lambda cur: json.dumps(dict(sorted(cur.items())), sort_keys=True),
    )
    return dict(result.artifact), flags, result.approved


def plan_paths(
    behaviours: Mapping[str, Behaviour], placed: PlacedScene, radius: float = CHARACTER_RADIUS
) -> tuple[dict[str, tuple[tuple[float, float], ...]], list[str]]:
    paths = {}
    flags = []
    for name in sorted(behaviours):
        b = behaviours[name]
        try:
            route = plan_locomotion(b.start_pos, b.end_pos, placed.floor_grid, radius)
            paths[name] = route.points
        except NoPath as exc:
            flags.append(f"{name}: no grid path ({exc}); straight segment used")
            paths[name] = (tuple(b.start_pos), tuple(b.end_pos))
    return paths, flags


def plan_behaviour(
    screenplay: Screenplay,
    placed: PlacedScene,
    fm: FunctionalMap,
    catalog: MotionCatalog,
    backend: AgentBackend,
    cfg: LoopConfig,
    transcript: Optional[Transcript] = None,
) -> tuple[BehaviourPlan, Transcript]:
    """Blocking, motions and paths for every clip, clip by clip within each act."""
    log = transcript if transcript is not None else Transcript()
    dm = build_detection_map(placed)
    clips: dict[ClipRef, dict[str, Behaviour]] = {}
    motions: dict[ClipRef, dict[str, int]] = {}
    paths: dict[ClipRef, dict] = {}
    best_effort: list[ClipRef] = []
    flags: list[str] = []
    for act in screenplay.acts:
        previous: Optional[dict[str, Behaviour]] = None
        for clip in act.clips:
            ref = ClipRef(act.index, clip.index)
            ctx = ClipContext(ref, clip, act, screenplay.profiles, dm, fm, placed)
            scope = log.scope(f"{ref}/blocking")
            initial, f0 = propose_blocking(ctx, backend, cfg, scope, previous, log_success=False)
            refined = refine_blocking(ctx, initial, backend, cfg, scope, previous)
            flags += [f"{ref} {x}" for x in f0 + refined.flags]
            if refined.best_effort:
                best_effort.append(ref)
            behaviours = refined.behaviours
            chosen, mflags, _ = select_motion(ctx, behaviours, catalog, backend, cfg, log.scope(f"{ref}/motion"))
            flags += mflags
            route, pflags = plan_paths(behaviours, placed)
            flags += [f"{ref} {x}" for x in pflags]
            clips[ref] = behaviours
            motions[ref] = chosen
            paths[ref] = route
            previous = behaviours
    plan = BehaviourPlan(clips, motions, paths, tuple(best_effort), tuple(flags))
    return plan, log


__all__ = [
    "BehaviourPlan",
    "BlockingRule",
    "BlockingViolation",
    "ClipContext",
    "DetectionMap",
    "EmptyCatalog",
    "UnparseableOutput",
    "addressees",
    "build_detection_map",
    "plan_behaviour",
    "plan_paths",
    "propose_blocking",
    "refine_blocking",
    "resolve_blocking",
    "select_motion",
    "validate_blocking",
]

