import json
import math

import pytest
from hypothesis import given, strategies as st

from previz.agents.backends import ScriptedBackend
from previz.agents.protocols import LoopConfig, MessageKind, Transcript
from previz.agents.responder import default_responder
from previz.camera import (
    InvalidParams,
    ShotContext,
    Tried,
    adjust_parameters,
    eval_ease,
    expand_template,
    fallback_search,
    in_frustum,
    key_subjects,
    load_registry,
    plan_shot,
    resolve_params,
    safe_default,
    sample_times,
    shot_subjects,
    validate_shot,
)
from previz.model import Behaviour, ClipRef, ShotParams, ShotSample, State, ValidationReport

from test_regions import EMPTY, scene_with

REG = load_registry()
C = REG.constants


def standing(name, x, y, facing):
    return Behaviour.still(name, State.STANDING, (x, y), facing)


def expand(type_, params, cast, duration=2.0, placed=EMPTY):
    return expand_template(REG.get(type_), params, cast, placed, duration, C)


def test_samples_at_fixed_rate_cover_the_clip():
    assert sample_times(2.0, 10.0) == pytest.approx([i / 10 for i in range(21)])
    assert sample_times(0.01, 10.0) == [0.0, 0.01]


@pytest.mark.parametrize("kind", ["linear", "ease_in", "ease_out", "ease_in_out"])
def test_ease_curves_are_monotone_from_zero_to_one(kind):
    xs = [eval_ease(kind, i / 100) for i in range(101)]
    assert xs[0] == 0.0 and xs[-1] == 1.0
    assert all(b >= a for a, b in zip(xs, xs[1:]))


def test_ease_rejects_out_of_range():
    with pytest.raises(ValueError):
        eval_ease("linear", 1.5)
    with pytest.raises(ValueError):
        eval_ease("bounce", 0.5)


@pytest.mark.parametrize("size,dist", [("CU", 1.0), ("MCU", 1.5), ("MS", 2.5), ("MLS", 3.5), ("LS", 5.0)])
def test_single_shot_sits_on_the_facing_axis(size, dist):
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    track = expand("single_static", ShotParams(("A",), shot_size=size), cast)
    for s in track.samples:
        assert s.position == pytest.approx((2.0 + dist, 2.0, 1.6))
        assert s.look_at == pytest.approx((2.0, 2.0, 1.6))
        assert s.vertical_fov == pytest.approx(math.radians(40))


def test_over_the_shoulder_geometry():
    cast = {"A": standing("A", 1.0, 2.0, 0.0), "B": standing("B", 3.0, 2.0, math.pi)}
    p = ShotParams(("A", "B"), framing="OTS_pair", shot_size="MS")
    s = expand("two_static", p, cast).samples[0]
    assert math.dist(s.position[:2], (3.0, 2.0)) == pytest.approx(2.5)
    assert s.position[2] == pytest.approx(1.6)
    assert s.look_at == pytest.approx((3.0, 2.0, 1.6))
    # behind A's side of the pair, 30 degrees off the line of action
    off = math.atan2(s.position[1] - 2.0, s.position[0] - 3.0)
    assert abs(abs(off) - math.radians(150)) < 1e-9
    assert key_subjects(REG.get("two_static"), p) == ("B",)
    assert key_subjects(REG.get("two_reverse"), p) == ("A",)


def test_relation_scales_two_shot_distance():
    cast = {"A": standing("A", 1.0, 2.0, math.pi / 2), "B": standing("B", 3.0, 2.0, math.pi / 2)}
    base = expand("two_static", ShotParams(("A", "B"), framing="two_shot", relation="equal"), cast).samples[0]
    far = expand("two_static", ShotParams(("A", "B"), framing="two_shot", relation="distant"), cast).samples[0]
    assert base.position[:2] == pytest.approx((2.0, 4.5))
    assert far.position[:2] == pytest.approx((2.0, 2.0 + 2.5 * 1.2))


def test_pedestal_rises_through_the_clip():
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    p = ShotParams(("A",), start_elev="low", end_elev="high", ease="linear")
    track = expand("pedestal", p, cast, duration=2.0)
    zs = [s.position[2] for s in track.samples]
    assert zs[0] == pytest.approx(0.8) and zs[10] == pytest.approx(1.7) and zs[-1] == pytest.approx(2.6)
    assert all(s.position[:2] == pytest.approx(track.samples[0].position[:2]) for s in track.samples)


def test_orbit_keeps_its_radius():
    cast = {"A": standing("A", 2.0, 2.0, 0.3)}
    track = expand("orbit", ShotParams(("A",)), cast)
    radii = [math.dist(s.position[:2], (2.0, 2.0)) for s in track.samples]
    assert max(radii) - min(radii) < 1e-9 and radii[0] == pytest.approx(2.5)
    a0 = math.atan2(track.samples[0].position[1] - 2, track.samples[0].position[0] - 2)
    a1 = math.atan2(track.samples[-1].position[1] - 2, track.samples[-1].position[0] - 2)
    assert a1 - a0 == pytest.approx(math.radians(60))


def test_push_in_ends_at_the_shot_distance():
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    track = expand("push_in", ShotParams(("A",), shot_size="MS"), cast)
    assert track.samples[0].position[0] == pytest.approx(2.0 + 2.5 * 1.6)
    assert track.samples[-1].position[0] == pytest.approx(4.5)


def test_group_camera_backs_off_by_the_spread():
    cast = {n: standing(n, x, 2.0, math.pi / 2) for n, x in (("A", 1.0), ("B", 2.0), ("C", 3.0))}
    s = expand("group_static", ShotParams(("A", "B", "C"), shot_size="MLS"), cast).samples[0]
    assert s.position[:2] == pytest.approx((2.0, 2.0 + 3.5 + 1.0))


def test_parameter_schema_is_enforced():
    tpl = REG.get("two_ots")
    with pytest.raises(InvalidParams):
        resolve_params(tpl, ShotParams(("A", "B"), framing="two_shot"))
    filled = resolve_params(tpl, ShotParams(("A", "B"), start_elev="low"))
    assert filled.start_elev is None and filled.framing == "OTS_pair" and filled.shot_size == "MCU"
    with pytest.raises(InvalidParams):
        expand("two_static", ShotParams(("A",)), {"A": standing("A", 1, 1, 0)})
    with pytest.raises(InvalidParams):
        expand("single_static", ShotParams(("Z",)), {"A": standing("A", 1, 1, 0)})
    with pytest.raises(InvalidParams):
        REG.get("crane")


def test_overrides_replace_constants():
    reg = load_registry(overrides={"v_min": 0.75})
    assert reg.constants.v_min == 0.75 and REG.constants.v_min == 0.5


def test_frustum_test():
    s = ShotSample(0.0, (0.0, 0.0, 1.6), (1.0, 0.0, 1.6), math.radians(40))
    assert in_frustum(s, (3.0, 0.0, 1.6), 16 / 9)
    assert not in_frustum(s, (-3.0, 0.0, 1.6), 16 / 9)
    half_v = math.tan(math.radians(20))
    assert in_frustum(s, (1.0, 0.0, 1.6 + 0.99 * half_v), 16 / 9)
    assert not in_frustum(s, (1.0, 0.0, 1.6 + 1.01 * half_v), 16 / 9)


# validation ------------------------------------------------------------------


def test_clear_shot_passes():
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    p = ShotParams(("A",), shot_size="MS")
    rep = validate_shot(expand("single_static", p, cast), EMPTY, cast, ("A",), C)
    assert rep.passed and rep.first_collision_sample is None and rep.occlusion_ratio == 0.0


def test_camera_inside_furniture_collides():
    placed = scene_with(("box", "cabinet", (0.6, 0.6, 2.0), (4.5, 2.0, 0.0)))
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    rep = validate_shot(expand("single_static", ShotParams(("A",), shot_size="MS"), cast, placed=placed), placed, cast, ("A",), C)
    assert rep.collision and rep.first_collision_sample == 0


def test_margin_counts_as_collision():
    # box face 5 cm from the camera, inside the 10 cm margin
    placed = scene_with(("box", "cabinet", (0.6, 0.6, 2.0), (4.5 + 0.35, 2.0, 0.0)))
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    rep = validate_shot(expand("single_static", ShotParams(("A",), shot_size="MS"), cast, placed=placed), placed, cast, ("A",), C)
    assert rep.collision


def test_wall_between_camera_and_subject_occludes():
    placed = scene_with(("wall", "shelf", (3.0, 0.2, 2.5), (3.2, 2.0, 0.0)))
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    rep = validate_shot(expand("single_static", ShotParams(("A",), shot_size="MS"), cast, placed=placed), placed, cast, ("A",), C)
    assert not rep.collision and rep.occlusion_ratio == 1.0 and not rep.passed


def test_low_table_does_not_hide_a_standing_subject():
    placed = scene_with(("table", "coffee table", (1.0, 0.6, 0.45), (3.2, 2.0, 0.0)))
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    rep = validate_shot(expand("single_static", ShotParams(("A",), shot_size="MS"), cast, placed=placed), placed, cast, ("A",), C)
    assert rep.occlusion_ratio == 0.0


def test_subject_behind_camera_is_unframed():
    cast = {"A": standing("A", 2.0, 2.0, 0.0), "B": standing("B", 4.8, 2.0, 0.0)}
    rep = validate_shot(expand("single_static", ShotParams(("A",), shot_size="MS"), cast), EMPTY, cast, ("A", "B"), C)
    assert not rep.framing_ok and len(rep.unframed_samples) == 21


# repair ladder ---------------------------------------------------------------

HIT = ValidationReport(True, 0, 0.0, True)
HIDDEN = ValidationReport(False, None, 0.5, True)
LOST = ValidationReport(False, None, 0.0, False)
OK = ValidationReport(False, None, 0.0, True)


def test_collision_tightens_one_step():
    tpl = REG.get("two_static")
    p = ShotParams(("A", "B"), framing="OTS_pair", shot_size="MS", angle="eye")
    assert adjust_parameters(HIT, p, tpl).shot_size == "MCU"
    tried = Tried()
    cu = adjust_parameters(HIT, ShotParams(("A", "B"), shot_size="MCU"), tpl, tried)
    assert cu.shot_size == "CU"
    # nothing tighter left: widen past the sizes already tried
    assert adjust_parameters(HIT, cu, tpl, tried).shot_size == "MS"


def test_occlusion_cycles_framing_then_angle():
    tpl = REG.get("two_static")
    tried = Tried()
    p = ShotParams(("A", "B"), framing="OTS_pair", shot_size="MS", angle="eye")
    seen = []
    while p is not None:
        seen.append((p.framing, p.angle))
        p = adjust_parameters(HIDDEN, p, tpl, tried)
    assert seen == [
        ("OTS_pair", "eye"),
        ("two_shot", "eye"),
        ("profile_duet", "eye"),
        ("split_depth", "eye"),
        ("split_depth", "high"),
        ("split_depth", "top"),
        ("split_depth", "low"),
    ]


def test_framing_failure_widens():
    tpl = REG.get("single_static")
    assert adjust_parameters(LOST, ShotParams(("A",), shot_size="MS"), tpl).shot_size == "MLS"
    assert adjust_parameters(LOST, ShotParams(("A",), shot_size="LS"), tpl) is None
    assert adjust_parameters(OK, ShotParams(("A",), shot_size="MS"), tpl) is None


def test_single_value_templates_have_no_occlusion_step():
    tpl = REG.get("single_low_angle")
    assert adjust_parameters(HIDDEN, ShotParams(("A",), shot_size="MS", angle="low"), tpl) is None


def test_fallback_scans_wide_to_tight_and_around():
    calls = []

    def check(choice):
        calls.append((choice.params.shot_size, round(math.degrees(choice.params.azimuth_offset))))
        good = choice.params.shot_size == "MLS" and calls[-1][1] == -60
        return OK if good else HIT

    choice, rep, ok = fallback_search(("A",), REG, check)
    assert ok and rep is OK
    ring = [0, 30, -30, 60, -60, 90, -90, 120, -120, 150, -150, 180]
    assert calls == [("LS", a) for a in ring] + [("MLS", a) for a in ring[:5]]
    assert choice.template_type == "single_static"


def test_fallback_gives_up_after_every_candidate():
    calls = []
    choice, rep, ok = fallback_search(("A", "B"), REG, lambda c: calls.append(c) or HIT)
    assert not ok and len(calls) == 5 * 12
    assert choice.params.shot_size == "LS" and choice.params.azimuth_offset == 0.0
    assert choice.template_type == "two_static"


def test_safe_default_by_arity():
    assert safe_default(("A",), REG).template_type == "single_static"
    assert safe_default(("A", "B"), REG).params.framing == "two_shot"
    assert safe_default(("A", "B", "C"), REG).params.shot_size == "LS"


def test_subject_order():
    assert shot_subjects(["A", "B", "C"], ["C", "A", "C"]) == ("C", "A", "B")
    assert shot_subjects(["A"], ["Z"]) == ("A",)


# planning --------------------------------------------------------------------


def shot_ctx(cast, placed=EMPTY, duration=2.0):
    subjects = tuple(cast)
    return ShotContext(ClipRef(1, 1), duration, subjects, cast, placed, {"clip_ref": "1.1"})


def proposal(**kw):
    return json.dumps({"rationale": "", **kw})


def test_default_replies_plan_a_passing_shot():
    cast = {"A": standing("A", 1.0, 2.5, 0.0), "B": standing("B", 3.0, 2.5, math.pi)}
    log = Transcript()
    backend = ScriptedBackend({}, default_responder)
    plan = plan_shot(shot_ctx(cast), [backend, backend], backend, REG, LoopConfig(), log)
    assert plan.report.passed and not plan.fallback
    assert plan.template_type == "two_static" and plan.params.framing == "OTS_pair"
    kinds = [e.kind for e in log.entries]
    assert kinds[:2] == [MessageKind.PROPOSAL] * 2
    assert MessageKind.JUDGMENT in kinds and MessageKind.VALIDATION_RESULT in kinds
    judges = [e.role for e in log.entries if e.kind is MessageKind.JUDGMENT]
    assert judges and all(r.startswith("director") for r in judges)


def test_colliding_pick_is_repaired():
    placed = scene_with(("box", "cabinet", (0.6, 0.6, 2.0), (4.5, 2.0, 0.0)))
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    fixture = {
        "shot_proposal": proposal(type="single_static", subjects=["A"], shot_size="MS", angle="eye"),
        "shot_judgment": json.dumps({"pick": 1}),
    }
    backend = ScriptedBackend(fixture, default_responder)
    plan = plan_shot(shot_ctx(cast, placed), [backend, backend], backend, REG, LoopConfig(), Transcript())
    assert plan.report.passed and not plan.fallback
    assert plan.params.shot_size == "MCU" and plan.validation_attempts == 2
    raw = plan_shot(shot_ctx(cast, placed), [backend, backend], backend, REG, LoopConfig(), Transcript(), validation=False)
    assert raw.report.collision and raw.params.shot_size == "MS"


def test_invalid_proposal_becomes_safe_default():
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    fixture = {"shot_proposal": proposal(type="single_closeup", subjects=["A"], shot_size="LS")}
    backend = ScriptedBackend(fixture, default_responder)
    plan = plan_shot(shot_ctx(cast), [backend, backend], backend, REG, LoopConfig(), Transcript())
    assert plan.template_type == "single_static" and plan.params.shot_size == "LS"


def test_boxed_in_subject_falls_back_and_is_flagged():
    walls = [
        ("n", "shelf", (0.2, 1.4, 2.5), (2.0, 2.6, 0.0)),
        ("s", "shelf", (0.2, 1.4, 2.5), (2.0, 1.4, 0.0)),
        ("e", "shelf", (1.0, 0.2, 2.5), (2.6, 2.0, 0.0)),
        ("w", "shelf", (1.0, 0.2, 2.5), (1.4, 2.0, 0.0)),
    ]
    placed = scene_with(*walls)
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    backend = ScriptedBackend({}, default_responder)
    plan = plan_shot(shot_ctx(cast, placed), [backend, backend], backend, REG, LoopConfig(), Transcript())
    assert plan.fallback and plan.unsafe and not plan.report.passed
    assert plan.validation_attempts <= LoopConfig().max_validation_attempts


@given(st.lists(st.sampled_from(["CU", "MCU", "MS", "MLS", "LS"]), min_size=1, max_size=8))
def test_validation_attempts_are_capped(sizes):
    placed = scene_with(("box", "cabinet", (0.6, 0.6, 2.0), (4.5, 2.0, 0.0)))
    cast = {"A": standing("A", 2.0, 2.0, 0.0)}
    fixture = {"shot_proposal": [proposal(type="single_static", subjects=["A"], shot_size=s) for s in sizes]}
    backend = ScriptedBackend(fixture, default_responder)
    log = Transcript()
    cfg = LoopConfig()
    plan = plan_shot(shot_ctx(cast, placed), [backend, backend], backend, REG, cfg, log)
    assert 1 <= plan.validation_attempts <= cfg.max_validation_attempts
    assert len(log.of_kind(MessageKind.VALIDATION_RESULT)) == plan.validation_attempts
