"""Camera templates, pose-track construction, engine checks and shot choice.

A template names a shot family and the enumerated parameters it accepts.
Expanding a template places the camera from the subjects' end poses using a
small table of distances and heights, and samples the move at a fixed rate.
A track is checked for the camera entering furniture, furniture hiding a key
subject, and key heads leaving the frustum. Failing shots are repaired one
parameter step at a time before falling back to a wide static shot.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

from .agents.backends import AgentBackend
from .agents.parsing import CritiqueOut, ShotJudgmentOut, ShotProposalOut
from .agents.protocols import (
    LoopConfig,
    MessageKind,
    Transcript,
    ask,
    run_debate_judge_validation,
)
from .geometry import Box3, segment_hits_box
from .model import (
    Behaviour,
    ClipRef,
    PlacedScene,
    ShotParams,
    ShotPlan,
    ShotSample,
    ShotTrack,
    State,
    ValidationReport,
)
from .regions import SITTING_PROXY_HEIGHTS, STANDING_PROXY_HEIGHTS

SHOT_SIZES = ("CU", "MCU", "MS", "MLS", "LS")
ANGLES = ("low", "eye", "high", "top")
EASES = ("linear", "ease_in", "ease_out", "ease_in_out")
FRAMING_CYCLE = ("OTS_pair", "two_shot", "profile_duet", "split_depth")
ANGLE_CYCLE = ("eye", "high", "top", "low")
ENUM_PARAMS = ("relation", "framing", "shot_size", "angle", "start_elev", "end_elev", "ease")


class InvalidParams(ValueError):
    pass


# --------------------------------------------------------------------------
# Registry
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CameraConstants:
    shot_distance: Mapping[str, float]
    angle_height: Mapping[str, float]
    ots_offset_deg: float = 30.0
    split_depth_offset_deg: float = 15.0
    vertical_fov_deg: float = 40.0
    aspect: float = 16.0 / 9.0
    sample_rate_hz: float = 10.0
    collision_margin: float = 0.1
    v_min: float = 0.5
    relation_distance_scale: Mapping[str, float] = field(default_factory=dict)
    dominant_look_fraction: Mapping[str, float] = field(default_factory=dict)
    head_height: Mapping[str, float] = field(default_factory=dict)
    move_span: Mapping[str, float] = field(default_factory=dict)

    @property
    def vertical_fov(self) -> float:
        return math.radians(self.vertical_fov_deg)


@dataclass(frozen=True)
class CameraTemplate:
    type: str
    arity: str  # "single" | "two" | "group"
    motion: str
    conventional: bool
    params: Mapping[str, tuple[str, ...]]
    defaults: Mapping[str, str]

    def accepts(self, n_subjects: int) -> bool:
        if self.arity == "single":
            return n_subjects == 1
        if self.arity == "two":
            return n_subjects == 2
        return n_subjects >= 3


@dataclass(frozen=True)
class CameraRegistry:
    templates: Mapping[str, CameraTemplate]
    constants: CameraConstants

    def get(self, type_: str) -> CameraTemplate:
        try:
            return self.templates[type_]
        except KeyError:
            raise InvalidParams(f"unknown camera template {type_!r}") from None

    def for_arity(self, n: int) -> list[CameraTemplate]:
        return [t for t in self.templates.values() if t.accepts(n)]

    def menu(self) -> list[dict]:
        return [
            {"type": t.type, "arity": t.arity, "params": {k: list(v) for k, v in t.params.items()}}
            for t in self.templates.values()
        ]


def registry_from_dict(data: Mapping[str, Any]) -> CameraRegistry:
    c = dict(data["constants"])
    consts = CameraConstants(**c)
    templates = {}
    for t in data["templates"]:
        tpl = CameraTemplate(
            t["type"],
            t["arity"],
            t["motion"],
            bool(t["conventional"]),
            {k: tuple(v) for k, v in t["params"].items()},
            dict(t["defaults"]),
        )
        if tpl.arity not in ("single", "two", "group"):
            raise ValueError(f"template {tpl.type}: bad arity {tpl.arity!r}")
        templates[tpl.type] = tpl
    return CameraRegistry(templates, consts)


def load_registry(path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> CameraRegistry:
    if path is None:
        text = resources.files("previz.data").joinpath("camera_registry.json").read_text()
    else:
        text = Path(path).read_text()
    data = json.loads(text)
    if overrides:
        data = {**data, "constants": {**data["constants"], **overrides}}
    return registry_from_dict(data)


# --------------------------------------------------------------------------
# Construction
# --------------------------------------------------------------------------


def eval_ease(kind: str, t: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"ease parameter {t} outside [0, 1]")
    if kind == "linear":
        return t
    if kind == "ease_in":
        return t * t
    if kind == "ease_out":
        return 1.0 - (1.0 - t) * (1.0 - t)
    if kind == "ease_in_out":
        return 3.0 * t * t - 2.0 * t * t * t
    raise ValueError(f"unknown ease {kind!r}")


def sample_times(duration: float, rate_hz: float) -> list[float]:
    n = max(2, int(round(duration * rate_hz)) + 1)
    return [duration * i / (n - 1) for i in range(n)]


def _unit(x: float, y: float) -> tuple[float, float]:
    n = math.hypot(x, y)
    if n < 1e-12:
        return (1.0, 0.0)
    return (x / n, y / n)


def _rot(v: tuple[float, float], a: float) -> tuple[float, float]:
    c, s = math.cos(a), math.sin(a)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1])


def head_point(b: Behaviour, consts: CameraConstants) -> tuple[float, float, float]:
    h = consts.head_height.get(b.end_state.value, 1.6)
    return (b.end_pos[0], b.end_pos[1], h)


def resolve_params(tpl: CameraTemplate, params: ShotParams) -> ShotParams:
    """Fill template defaults and check every enumerated value against the schema."""
    filled = {}
    for name in ENUM_PARAMS:
        value = getattr(params, name)
        allowed = tpl.params.get(name)
        if value is None:
            value = tpl.defaults.get(name)
        if value is None:
            continue
        if allowed is None:
            # values for parameters the template does not take are dropped
            value = None
        elif value not in allowed:
            raise InvalidParams(f"{tpl.type}: {name}={value!r} not in {list(allowed)}")
        filled[name] = value
    return replace(params, **filled)


@dataclass(frozen=True)
class _Rig:
    """Camera and target at the start and end of a move, plus the key subjects."""

    pos0: tuple[float, float, float]
    pos1: tuple[float, float, float]
    look0: tuple[float, float, float]
    look1: tuple[float, float, float]
    pivot: tuple[float, float]
    sweep: float = 0.0  # orbit angle across the move, radians


def _lerp(a: Sequence[float], b: Sequence[float], s: float) -> tuple[float, ...]:
    return tuple(x + (y - x) * s for x, y in zip(a, b))


def _subject_frame(
    tpl: CameraTemplate, params: ShotParams, subs: Sequence[Behaviour], consts: CameraConstants
) -> tuple[tuple[float, float], tuple[float, float, float], tuple[float, float], float]:
    """(camera xy, look-at point, pivot xy, base distance) for the static construction."""
    size = params.shot_size or "MS"
    d = consts.shot_distance[size]
    heads = [head_point(b, consts) for b in subs]
    if len(subs) == 1:
        b = subs[0]
        fwd = (math.cos(b.end_facing), math.sin(b.end_facing))
        cam = (b.end_pos[0] + d * fwd[0], b.end_pos[1] + d * fwd[1])
        return cam, heads[0], b.end_pos, d
    if len(subs) == 2 and tpl.arity == "two":
        a, bb = subs
        ha, hb = heads
        framing = params.framing or "two_shot"
        if tpl.motion == "reverse":
            a, bb, ha, hb = bb, a, hb, ha
        u = _unit(bb.end_pos[0] - a.end_pos[0], bb.end_pos[1] - a.end_pos[1])
        mid = ((a.end_pos[0] + bb.end_pos[0]) / 2.0, (a.end_pos[1] + bb.end_pos[1]) / 2.0)
        frac = consts.dominant_look_fraction.get(params.relation or "", 0.5)
        look = tuple(ha[i] + (hb[i] - ha[i]) * frac for i in range(3))
        if framing == "OTS_pair":
            back = (-u[0], -u[1])
            off = _rot(back, math.radians(consts.ots_offset_deg))
            cam = (bb.end_pos[0] + d * off[0], bb.end_pos[1] + d * off[1])
            return cam, hb, bb.end_pos, d
        if framing == "split_depth":
            back = _rot((-u[0], -u[1]), math.radians(consts.split_depth_offset_deg))
            half = math.dist(a.end_pos, bb.end_pos) / 2.0
            cam = (mid[0] + (d + half) * back[0], mid[1] + (d + half) * back[1])
            return cam, look, mid, d
        scale = consts.relation_distance_scale.get(params.relation or "", 1.0)
        dd = d * scale
        n = (-u[1], u[0])
        fa = (math.cos(a.end_facing), math.sin(a.end_facing))
        fb = (math.cos(bb.end_facing), math.sin(bb.end_facing))
        side = 1.0 if (fa[0] + fb[0]) * n[0] + (fa[1] + fb[1]) * n[1] >= 0 else -1.0
        if framing == "profile_duet":
            side = -side
        cam = (mid[0] + side * dd * n[0], mid[1] + side * dd * n[1])
        return cam, look, mid, dd
    cx = sum(b.end_pos[0] for b in subs) / len(subs)
    cy = sum(b.end_pos[1] for b in subs) / len(subs)
    fx = sum(math.cos(b.end_facing) for b in subs)
    fy = sum(math.sin(b.end_facing) for b in subs)
    f = _unit(fx, fy)
    spread = max(math.dist((cx, cy), b.end_pos) for b in subs)
    cam = (cx + (d + spread) * f[0], cy + (d + spread) * f[1])
    hz = sum(h[2] for h in heads) / len(heads)
    return cam, (cx, cy, hz), (cx, cy), d + spread


def key_subjects(tpl: CameraTemplate, params: ShotParams) -> tuple[str, ...]:
    """Subjects whose visibility and framing the checks enforce.

    An over-the-shoulder shot keeps only the subject facing the camera; the
    near shoulder is expected to be partly out of frame.
    """
    subs = tuple(params.subjects)
    if tpl.arity == "two" and len(subs) == 2:
        framing = params.framing or tpl.defaults.get("framing")
        if framing == "OTS_pair":
            return (subs[0],) if tpl.motion == "reverse" else (subs[1],)
    return subs


def _rotate_about(p: Sequence[float], pivot: Sequence[float], a: float) -> tuple[float, float]:
    v = _rot((p[0] - pivot[0], p[1] - pivot[1]), a)
    return (pivot[0] + v[0], pivot[1] + v[1])


def expand_template(
    tpl: CameraTemplate,
    params: ShotParams,
    behaviours: Mapping[str, Behaviour],
    placed: Optional[PlacedScene],
    duration: float,
    consts: CameraConstants,
) -> ShotTrack:
    """Sample the camera move for ``duration`` seconds.

    ``placed`` is accepted for callers that pass scene context; the
    construction only depends on the subjects.
    """
    if not tpl.accepts(len(params.subjects)):
        raise InvalidParams(f"{tpl.type} does not take {len(params.subjects)} subject(s)")
    missing = [s for s in params.subjects if s not in behaviours]
    if missing:
        raise InvalidParams(f"no behaviour for subject(s) {', '.join(missing)}")
    if not (duration > 0 and math.isfinite(duration)):
        raise InvalidParams(f"duration must be positive, got {duration}")
    p = resolve_params(tpl, params)
    subs = [behaviours[s] for s in p.subjects]
    span = consts.move_span
    cam, look, pivot, d = _subject_frame(tpl, p, subs, consts)
    z = consts.angle_height[p.angle or "eye"]
    motion = tpl.motion
    pos0 = pos1 = (cam[0], cam[1], z)
    look0 = look1 = look
    sweep = 0.0
    if motion == "pedestal":
        pos0 = (cam[0], cam[1], consts.angle_height[p.start_elev or "eye"])
        pos1 = (cam[0], cam[1], consts.angle_height[p.end_elev or "eye"])
    elif motion == "dolly":
        axis = _unit(cam[0] - pivot[0], cam[1] - pivot[1])
        side = (-axis[1], axis[0])
        m = span.get("dolly_m", 0.75)
        pos0 = (cam[0] - m * side[0], cam[1] - m * side[1], z)
        pos1 = (cam[0] + m * side[0], cam[1] + m * side[1], z)
    elif motion == "orbit":
        sweep = 2.0 * math.radians(span.get("orbit_deg", 30.0))
        start = _rotate_about(cam, pivot, -sweep / 2.0)
        pos0 = pos1 = (start[0], start[1], z)
    elif motion == "pan":
        if len(subs) == 2:
            look0, look1 = head_point(subs[0], consts), head_point(subs[1], consts)
        else:
            axis = _unit(cam[0] - pivot[0], cam[1] - pivot[1])
            side = (-axis[1], axis[0])
            m = span.get("pan_m", 1.0)
            look0 = (look[0] + m * side[0], look[1] + m * side[1], look[2])
    elif motion in ("push_in", "pull_out"):
        ratio = span.get("push_ratio", 1.6)
        far = (pivot[0] + (cam[0] - pivot[0]) * ratio, pivot[1] + (cam[1] - pivot[1]) * ratio, z)
        near = (cam[0], cam[1], z)
        pos0, pos1 = (far, near) if motion == "push_in" else (near, far)
    ease = p.ease or "linear"
    samples = []
    fov = consts.vertical_fov
    for t in sample_times(duration, consts.sample_rate_hz):
        s = eval_ease(ease, min(1.0, t / duration))
        pos = _lerp(pos0, pos1, s)
        if sweep:
            xy = _rotate_about(pos, pivot, sweep * s)
            pos = (xy[0], xy[1], pos[2])
        tgt = _lerp(look0, look1, s)
        if p.azimuth_offset:
            xy = _rotate_about(pos, pivot, p.azimuth_offset)
            pos = (xy[0], xy[1], pos[2])
        samples.append(ShotSample(t, tuple(pos), tuple(tgt), fov))
    return ShotTrack(tuple(samples))


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


def _basis(pos: Sequence[float], look: Sequence[float]):
    f = [look[i] - pos[i] for i in range(3)]
    n = math.sqrt(sum(v * v for v in f))
    if n < 1e-12:
        return None
    f = [v / n for v in f]
    r = [f[1], -f[0], 0.0]  # f x z_up
    rn = math.hypot(r[0], r[1])
    if rn < 1e-9:
        r = [1.0, 0.0, 0.0]
    else:
        r = [r[0] / rn, r[1] / rn, 0.0]
    u = [r[1] * f[2] - r[2] * f[1], r[2] * f[0] - r[0] * f[2], r[0] * f[1] - r[1] * f[0]]
    return f, r, u


def in_frustum(sample: ShotSample, p: Sequence[float], aspect: float) -> bool:
    basis = _basis(sample.position, sample.look_at)
    if basis is None:
        return False
    f, r, u = basis
    v = [p[i] - sample.position[i] for i in range(3)]
    depth = sum(v[i] * f[i] for i in range(3))
    if depth <= 1e-9:
        return False
    tv = math.tan(sample.vertical_fov / 2.0)
    th = aspect * tv
    x = sum(v[i] * r[i] for i in range(3)) / depth
    y = sum(v[i] * u[i] for i in range(3)) / depth
    return abs(x) <= th + 1e-12 and abs(y) <= tv + 1e-12


def _seat_of(b: Behaviour, placed: PlacedScene) -> Optional[str]:
    if b.end_state is not State.SITTING:
        return None
    for oid, rect in placed.footprints():
        if rect.contains_point(b.end_pos, 1e-6) and placed.scene_graph.object(oid).sittable:
            return oid
    for oid, rect in placed.footprints():
        if rect.contains_point(b.end_pos, 1e-6):
            return oid
    return None


def subject_visibility(
    cam: Sequence[float], b: Behaviour, placed: PlacedScene, boxes: Sequence[tuple[str, Box3]]
) -> float:
    heights = SITTING_PROXY_HEIGHTS if b.end_state is State.SITTING else STANDING_PROXY_HEIGHTS
    seat = _seat_of(b, placed)
    clear = 0
    for h in heights:
        p = (b.end_pos[0], b.end_pos[1], h)
        if not any(segment_hits_box(p, cam, box) for oid, box in boxes if oid != seat):
            clear += 1
    return clear / len(heights)


def first_collision(track: ShotTrack, placed: PlacedScene, margin: float) -> Optional[int]:
    """Index of the first sample inside a box grown by ``margin``, or None."""
    grown = [box.inflate(margin) for _, box in placed.boxes()]
    for i, s in enumerate(track.samples):
        if any(g.contains(s.position, 0.0) for g in grown):
            return i
    return None


def occluded_samples(
    track: ShotTrack,
    placed: PlacedScene,
    subjects: Sequence[Behaviour],
    v_min: float,
) -> list[int]:
    boxes = placed.boxes()
    return [
        i
        for i, s in enumerate(track.samples)
        if any(subject_visibility(s.position, b, placed, boxes) < v_min for b in subjects)
    ]


def validate_shot(
    track: ShotTrack,
    placed: PlacedScene,
    behaviours: Mapping[str, Behaviour],
    subjects: Sequence[str],
    consts: CameraConstants,
    v_min: Optional[float] = None,
) -> ValidationReport:
    v_min = consts.v_min if v_min is None else v_min
    subs = [behaviours[s] for s in subjects]
    first_hit = first_collision(track, placed, consts.collision_margin)
    occluded = occluded_samples(track, placed, subs, v_min)
    unframed = [
        i
        for i, s in enumerate(track.samples)
        if not all(in_frustum(s, head_point(b, consts), consts.aspect) for b in subs)
    ]
    n = len(track.samples)
    return ValidationReport(
        collision=first_hit is not None,
        first_collision_sample=first_hit,
        occlusion_ratio=len(occluded) / n,
        framing_ok=not unframed,
        occluded_samples=tuple(occluded),
        unframed_samples=tuple(unframed),
    )


# --------------------------------------------------------------------------
# Repair ladder
# --------------------------------------------------------------------------


@dataclass
class Tried:
    sizes: set = field(default_factory=set)
    framings: set = field(default_factory=set)
    angles: set = field(default_factory=set)

    def note(self, p: ShotParams) -> None:
        if p.shot_size:
            self.sizes.add(p.shot_size)
        if p.framing:
            self.framings.add(p.framing)
        if p.angle:
            self.angles.add(p.angle)


def _step_size(p: ShotParams, allowed: Sequence[str], tried: set, tighter_first: bool) -> Optional[str]:
    if p.shot_size is None:
        return None
    i = SHOT_SIZES.index(p.shot_size)
    tighter = [s for s in reversed(SHOT_SIZES[:i]) if s in allowed and s not in tried]
    wider = [s for s in SHOT_SIZES[i + 1 :] if s in allowed and s not in tried]
    order = (tighter + wider) if tighter_first else wider
    return order[0] if order else None


def adjust_parameters(
    report: ValidationReport,
    params: ShotParams,
    tpl: CameraTemplate,
    tried: Optional[Tried] = None,
) -> Optional[ShotParams]:
    """Next parameter set on the repair ladder, or None when it is exhausted.

    Collision tightens the shot size one step (widening once nothing tighter
    is left), occlusion moves to the next framing and then the next angle,
    and a framing failure widens one step. ``tried`` records values already
    validated so repeated calls never revisit them.
    """
    tried = tried if tried is not None else Tried()
    tried.note(params)
    sizes = tpl.params.get("shot_size", ())
    if report.collision:
        nxt = _step_size(params, sizes, tried.sizes, tighter_first=True)
        return replace(params, shot_size=nxt) if nxt else None
    if report.occlusion_ratio > 0:
        framings = tpl.params.get("framing", ())
        if params.framing in FRAMING_CYCLE and len(framings) > 1:
            i = FRAMING_CYCLE.index(params.framing)
            for k in range(1, len(FRAMING_CYCLE)):
                cand = FRAMING_CYCLE[(i + k) % len(FRAMING_CYCLE)]
                if cand in framings and cand not in tried.framings:
                    return replace(params, framing=cand)
        angles = tpl.params.get("angle", ())
        if params.angle in ANGLE_CYCLE and len(angles) > 1:
            i = ANGLE_CYCLE.index(params.angle)
            for k in range(1, len(ANGLE_CYCLE)):
                cand = ANGLE_CYCLE[(i + k) % len(ANGLE_CYCLE)]
                if cand in angles and cand not in tried.angles:
                    return replace(params, angle=cand)
        return None
    if not report.framing_ok:
        nxt = _step_size(params, sizes, tried.sizes, tighter_first=False)
        return replace(params, shot_size=nxt) if nxt else None
    return None


# --------------------------------------------------------------------------
# Shot choice
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ShotChoice:
    template_type: str
    params: ShotParams
    rationale: str = ""


def choice_from_reply(reply: ShotProposalOut, registry: CameraRegistry) -> ShotChoice:
    tpl = registry.get(reply.type)
    params = ShotParams(
        subjects=tuple(reply.subjects),
        relation=reply.relation,
        framing=reply.framing,
        shot_size=reply.shot_size,
        angle=reply.angle.lower() if reply.angle else None,
        start_elev=reply.start_elev,
        end_elev=reply.end_elev,
        ease=reply.ease,
    )
    if not tpl.accepts(len(params.subjects)):
        raise InvalidParams(f"{tpl.type} does not take {len(params.subjects)} subject(s)")
    return ShotChoice(tpl.type, resolve_params(tpl, params), reply.rationale)


def safe_default(subjects: Sequence[str], registry: CameraRegistry) -> ShotChoice:
    n = len(subjects)
    if n == 1:
        tpl = registry.get("single_static")
        params = ShotParams(tuple(subjects), shot_size="LS", angle="eye")
    elif n == 2:
        tpl = registry.get("two_static")
        params = ShotParams(tuple(subjects), relation="equal", framing="two_shot", shot_size="LS", angle="eye")
    else:
        tpl = registry.get("group_static")
        params = ShotParams(tuple(subjects), shot_size="LS", angle="eye")
    return ShotChoice(tpl.type, resolve_params(tpl, params), "safe default")


def fallback_search(
    subjects: Sequence[str],
    registry: CameraRegistry,
    check: Callable[[ShotChoice], ValidationReport],
) -> tuple[ShotChoice, ValidationReport, bool]:
    """Wide static shots from widest to tightest, swinging round the subjects in 30 degree steps."""
    base = safe_default(subjects, registry)
    offsets = [0.0]
    for k in range(1, 7):
        offsets += [math.radians(30 * k), -math.radians(30 * k)] if k < 6 else [math.radians(180)]
    first = None
    for size in reversed(SHOT_SIZES):
        for off in offsets:
            choice = replace(base, params=replace(base.params, shot_size=size, azimuth_offset=off))
            rep = check(choice)
            if first is None:
                first = (choice, rep)
            if rep.passed:
                return choice, rep, True
    assert first is not None
    return first[0], first[1], False


@dataclass
class ShotContext:
    ref: ClipRef
    duration: float
    subjects: tuple[str, ...]
    behaviours: Mapping[str, Behaviour]
    placed: PlacedScene
    prompt: Mapping[str, Any]


def plan_shot(
    ctx: ShotContext,
    proposers: Sequence[AgentBackend],
    judge_backend: AgentBackend,
    registry: CameraRegistry,
    cfg: LoopConfig,
    transcript: Optional[Transcript] = None,
    *,
    validation: bool = True,
) -> ShotPlan:
    """Debate a shot for one clip and return a validated (or flagged) plan.

    With ``validation`` off the judge's choice is expanded and reported as
    is, which is how raw plans are produced for comparison.
    """
    log = transcript if transcript is not None else Transcript()
    consts = registry.constants
    base = {**ctx.prompt, "subjects": list(ctx.subjects), "templates": registry.menu()}
    roles = ("cinematographer:P1", "cinematographer:P2")

    def expand(choice: ShotChoice) -> ShotTrack:
        return expand_template(
            registry.get(choice.template_type), choice.params, ctx.behaviours, ctx.placed, ctx.duration, consts
        )

    def check(choice: ShotChoice) -> ValidationReport:
        tpl = registry.get(choice.template_type)
        return validate_shot(expand(choice), ctx.placed, ctx.behaviours, key_subjects(tpl, choice.params), consts)

    def sanitize(reply: ShotProposalOut, who: str) -> ShotChoice:
        try:
            return choice_from_reply(reply, registry)
        except InvalidParams as exc:
            fallback = safe_default(ctx.subjects, registry)
            return replace(fallback, rationale=f"{who} proposal rejected: {exc}")

    def proposer(i: int):
        def make() -> ShotChoice:
            reply = ask(
                proposers[i], roles[i], base, "shot_proposal", cfg, log, 0, MessageKind.PROPOSAL, log_success=False
            )
            return sanitize(reply, roles[i])

        return make

    def critique(i: int, own: ShotChoice, other: ShotChoice, x: int) -> str:
        prompt = {**base, "own": _choice_json(own), "other": _choice_json(other)}
        reply: CritiqueOut = ask(
            proposers[i], roles[i], prompt, "critique", cfg, log, x, MessageKind.CRITIQUE, log_success=False
        )
        return json.dumps(reply.model_dump(mode="json"), sort_keys=True)

    def judge(a: ShotChoice, b: ShotChoice, critiques: list[str]) -> ShotChoice:
        prompt = {**base, "proposals": [_choice_json(a), _choice_json(b)], "critiques": critiques}
        reply: ShotJudgmentOut = ask(
            judge_backend,
            "director:D",
            prompt,
            "shot_judgment",
            cfg,
            log,
            cfg.debate_exchanges + 1,
            MessageKind.JUDGMENT,
            log_success=False,
        )
        if reply.merged is not None:
            picked = sanitize(reply.merged, "judge")
        else:
            picked = a if reply.pick in (None, 1) else b
        return replace(picked, rationale=reply.rationale or picked.rationale)

    if not validation:
        proposals = [proposer(0)(), proposer(1)()]
        for role, p in zip(roles, proposals):
            log.add(0, role, MessageKind.PROPOSAL, json.dumps(_choice_json(p), sort_keys=True))
        crit = []
        for x in range(1, cfg.debate_exchanges + 1):
            for i, role in enumerate(roles):
                text = critique(i, proposals[i], proposals[1 - i], x)
                log.add(x, role, MessageKind.CRITIQUE, text)
                crit.append(text)
        choice = judge(proposals[0], proposals[1], crit)
        log.add(cfg.debate_exchanges + 1, "director:D", MessageKind.JUDGMENT, json.dumps(_choice_json(choice), sort_keys=True))
        return ShotPlan(ctx.ref, choice.template_type, choice.params, expand(choice), check(choice), choice.rationale)

    tried = Tried()

    def validator(choice: ShotChoice) -> tuple[bool, ValidationReport]:
        rep = check(choice)
        return rep.passed, rep

    def adjuster(choice: ShotChoice, rep: ValidationReport) -> Optional[ShotChoice]:
        nxt = adjust_parameters(rep, choice.params, registry.get(choice.template_type), tried)
        return None if nxt is None else replace(choice, params=nxt)

    result = run_debate_judge_validation(
        [proposer(0), proposer(1)],
        critique,
        judge,
        validator,
        adjuster,
        cfg,
        transcript=log,
        proposer_roles=roles,
        judge_role="director:D",
        validator_role="engine",
        describe=lambda c: json.dumps(_choice_json(c), sort_keys=True),
        describe_report=lambda r: json.dumps(_report_json(r), sort_keys=True),
    )
    choice = result.choice
    if result.passed:
        return ShotPlan(
            ctx.ref, choice.template_type, choice.params, expand(choice), result.report, choice.rationale,
            validation_attempts=result.attempts,
        )
    safe, rep, ok = fallback_search(ctx.subjects, registry, check)
    note = f"fallback after {result.attempts} failed validation(s); judge chose {choice.template_type}"
    return ShotPlan(
        ctx.ref,
        safe.template_type,
        safe.params,
        expand(safe),
        rep,
        note,
        fallback=True,
        unsafe=not ok,
        validation_attempts=result.attempts,
    )


def _choice_json(c: ShotChoice) -> dict:
    out = {"type": c.template_type, "subjects": list(c.params.subjects), "rationale": c.rationale}
    for name in ENUM_PARAMS:
        v = getattr(c.params, name)
        if v is not None:
            out[name] = v
    if c.params.azimuth_offset:
        out["azimuth_offset"] = round(c.params.azimuth_offset, 6)
    return out


def _report_json(r: ValidationReport) -> dict:
    return {
        "collision": r.collision,
        "first_collision_sample": r.first_collision_sample,
        "occlusion_ratio": r.occlusion_ratio,
        "framing_ok": r.framing_ok,
        "passed": r.passed,
    }


def shot_subjects(participants: Sequence[str], speakers: Iterable[str]) -> tuple[str, ...]:
    """Speakers first, in order of speaking, then silent participants."""
    order = list(dict.fromkeys(s for s in speakers if s in participants))
    order += [p for p in participants if p not in order]
    return tuple(order)
