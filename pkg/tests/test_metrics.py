import math

import pytest
from hypothesis import given, strategies as st

from previz.behaviour import BehaviourPlan
from previz.camera import expand_template, key_subjects, load_registry, occluded_samples, validate_shot
from previz.layout import layout_scene
from previz.metrics import (
    AnnotationSet,
    CameraAnnotation,
    ClipAnnotation,
    MetricsReport,
    MisalignedClips,
    MotionAnnotation,
    blocking_loss_norm,
    camera_collision_rate,
    camera_template_accuracy,
    compute_report,
    motion_accuracy,
    motion_diversity,
    object_collision_rate,
    occlusion_rate,
    walkability,
)
from previz.model import Behaviour, ClipRef, ShotParams, ShotPlan, State
from previz.regions import RegionLossParams, default_cameras, enumerate_candidates, score_candidates

from oracles import blocked_cells, entropy_ratio, flood_fill_walkability
from scenes import ROOM, living_room
from test_regions import EMPTY, scene_with

REG = load_registry()
R1 = ClipRef(1, 1)


# layout ----------------------------------------------------------------------


def test_one_overlapping_pair_among_four():
    placed = scene_with(
        ("a", "desk", (1.0, 1.0, 1.0), (1.0, 1.0, 0.0)),
        ("b", "desk", (1.0, 1.0, 1.0), (1.5, 1.0, 0.0)),
        ("c", "desk", (1.0, 1.0, 1.0), (4.0, 4.0, 0.0)),
        ("d", "desk", (1.0, 1.0, 1.0), (1.0, 4.0, 0.0)),
    )
    assert object_collision_rate(placed) == 0.5
    assert object_collision_rate(placed, "pairs") == pytest.approx(1 / 6)
    with pytest.raises(ValueError):
        object_collision_rate(placed, "volume")


def test_touching_and_stacked_objects_do_not_collide():
    placed = layout_scene(living_room(), ROOM, seed=7)
    assert object_collision_rate(placed) == 0.0
    edge = scene_with(("a", "desk", (1.0, 1.0, 1.0), (1.0, 1.0, 0.0)), ("b", "desk", (1.0, 1.0, 1.0), (2.0, 1.0, 0.0)))
    assert object_collision_rate(edge) == 0.0
    assert object_collision_rate(EMPTY) == 0.0


def test_empty_room_is_fully_walkable():
    assert walkability(EMPTY) == (1.0, 1.0)


def _oracle(placed, radius=0.3):
    rects = [placed.footprint(o) for o in placed.placed_ids()]
    anchors = [placed.footprint(o.id) for o in placed.scene_graph.objects if o.is_anchor and o.id in placed.poses]
    g = placed.floor_grid
    blocked = blocked_cells(rects, g.rows, g.cols, g.cell_size, radius)
    return flood_fill_walkability(blocked, g.cell_size, anchors)


def test_living_room_matches_flood_fill():
    placed = layout_scene(living_room(), ROOM, seed=7)
    got = walkability(placed)
    want = _oracle(placed)
    assert got[0] == pytest.approx(want[0], abs=1e-12) and got[1] == want[1]


def test_wall_splits_the_room():
    # full-height wall at x = 2.5 with no gap: the larger side wins, the other anchor is unreachable
    placed = scene_with(
        ("wall", "shelf", (5.0, 0.2, 2.5), (2.0, 2.5, 0.0)),
        ("desk", "desk", (0.5, 0.5, 0.8), (4.5, 4.5, 0.0)),
    )
    walk, reach = walkability(placed)
    assert (walk, reach) == pytest.approx(_oracle(placed), abs=1e-12)
    assert reach == 1.0  # the wall itself borders the big side
    assert walk < 0.6


# blocking --------------------------------------------------------------------


def _losses(placed):
    p = RegionLossParams()
    return score_candidates(enumerate_candidates(placed, p), p, placed, default_cameras(placed.bounds))


def test_blocking_loss_at_best_and_worst_candidates():
    placed = layout_scene(living_room(), ROOM, seed=7)
    scored = _losses(placed)
    best = min(scored, key=lambda c: c.loss)
    worst = max(scored, key=lambda c: c.loss)
    at = lambda c: Behaviour.still("A", State.STANDING, c.center, 0.0)
    assert blocking_loss_norm([at(best)], placed) == pytest.approx(0.0, abs=1e-12)
    assert blocking_loss_norm([at(worst)], placed) == pytest.approx(1.0, abs=1e-12)
    assert blocking_loss_norm([at(best), at(worst)], placed) == pytest.approx(0.5, abs=1e-12)


def test_blocking_loss_skips_seated_poses_and_clips_to_unit_range():
    placed = layout_scene(living_room(), ROOM, seed=7)
    seated = Behaviour.still("A", State.SITTING, (0.9, 1.0), 0.0)
    with pytest.raises(ValueError):
        blocking_loss_norm([seated], placed)
    inside_sofa = Behaviour.still("A", State.STANDING, placed.footprint("sofa").center, 0.0)
    assert blocking_loss_norm([inside_sofa], placed) == 1.0


def test_blocking_loss_is_zero_when_every_candidate_ties():
    # walls leave exactly one free 0.6 m block, so the loss range is empty
    placed = scene_with(
        ("l", "shelf", (5.0, 2.2, 2.0), (1.1, 2.5, 0.0)),
        ("r", "shelf", (5.0, 2.2, 2.0), (3.9, 2.5, 0.0)),
        ("t", "shelf", (2.2, 0.6, 2.0), (2.5, 3.9, 0.0)),
        ("b", "shelf", (2.2, 0.6, 2.0), (2.5, 1.1, 0.0)),
    )
    assert len(_losses(placed)) == 1
    assert blocking_loss_norm([Behaviour.still("A", State.STANDING, (2.5, 2.5), 0.0)], placed) == 0.0


# motions ---------------------------------------------------------------------


def test_diversity_examples():
    assert motion_diversity([5, 7]) == 1.0
    assert motion_diversity([5, 7, 9, 5, 7, 9]) == 1.0
    assert motion_diversity([4, 4, 4]) == 0.0
    assert motion_diversity([1, 1, 1, 2]) == pytest.approx(0.811278, abs=1e-6)
    with pytest.raises(ValueError):
        motion_diversity([])


@given(st.lists(st.integers(0, 6), min_size=1, max_size=40))
def test_diversity_matches_natural_log_oracle(ids):
    counts = [ids.count(i) for i in sorted(set(ids))]
    assert motion_diversity(ids) == pytest.approx(entropy_ratio(counts), abs=1e-12)
    assert 0.0 <= motion_diversity(ids) <= 1.0


def _plan(motions):
    clips = {ref: {n: Behaviour.still(n, State.STANDING, (1.0, 1.0), 0.0) for n in m} for ref, m in motions.items()}
    return BehaviourPlan(clips, motions)


def test_motion_accuracy_counts_matching_ids():
    plan = _plan({R1: {"Elias": 29, "Maya": 17}, ClipRef(1, 2): {"Clara": 20}})
    ann = AnnotationSet(
        {
            R1: ClipAnnotation((MotionAnnotation("Elias", 29), MotionAnnotation("Maya", 7))),
            ClipRef(1, 2): ClipAnnotation((MotionAnnotation("Clara", 20),)),
        }
    )
    assert motion_accuracy(plan, ann) == pytest.approx(2 / 3)
    assert motion_diversity(plan) == 1.0


def test_motion_accuracy_rejects_misaligned_annotations():
    plan = _plan({R1: {"Elias": 29}})
    with pytest.raises(MisalignedClips):
        motion_accuracy(plan, AnnotationSet({ClipRef(2, 1): ClipAnnotation((MotionAnnotation("Elias", 29),))}))
    with pytest.raises(MisalignedClips):
        motion_accuracy(plan, AnnotationSet({R1: ClipAnnotation((MotionAnnotation("Maya", 29),))}))
    with pytest.raises(MisalignedClips):
        motion_accuracy(plan, AnnotationSet({R1: ClipAnnotation()}))


# camera ----------------------------------------------------------------------


def _shot(type_, params, cast, placed=EMPTY, ref=R1):
    tpl = REG.get(type_)
    track = expand_template(tpl, params, cast, placed, 1.0, REG.constants)
    rep = validate_shot(track, placed, cast, key_subjects(tpl, params), REG.constants)
    return ShotPlan(ref, type_, params, track, rep)


def test_camera_collision_and_occlusion_rates():
    placed = scene_with(
        ("box", "cabinet", (0.6, 0.6, 2.0), (4.5, 2.0, 0.0)),
        ("wall", "shelf", (0.2, 3.0, 2.5), (2.0, 3.0, 0.0)),
    )
    a = {"A": Behaviour.still("A", State.STANDING, (2.0, 2.0), 0.0)}
    hit = _shot("single_static", ShotParams(("A",), shot_size="MS"), a, placed)
    hidden = _shot("single_static", ShotParams(("A",), shot_size="MS"), {"A": Behaviour.still("A", State.STANDING, (2.0, 2.0), math.pi / 2)}, placed, ClipRef(1, 2))
    clear = _shot("single_static", ShotParams(("A",), shot_size="CU"), a, placed, ClipRef(1, 3))
    plans = [hit, hidden, clear]
    assert camera_collision_rate(plans, placed, REG.constants) == pytest.approx(1 / 3)
    casts = {pl.clip: {"A": Behaviour.still("A", State.STANDING, (2.0, 2.0), 0.0 if pl is not hidden else math.pi / 2)} for pl in plans}
    n = sum(len(pl.track.samples) for pl in plans)
    # the camera inside the cabinet also loses the subject
    assert occlusion_rate(plans, casts, placed, REG) == pytest.approx(2 * len(hidden.track.samples) / n)
    assert camera_collision_rate([], placed, REG.constants) == 0.0
    with pytest.raises(MisalignedClips):
        occlusion_rate(plans, {}, placed, REG)


def test_ots_occlusion_ignores_the_near_shoulder():
    cast = {
        "Elias": Behaviour.still("Elias", State.STANDING, (1.0, 2.5), 0.0),
        "Maya": Behaviour.still("Maya", State.STANDING, (3.0, 2.5), math.pi),
    }
    # a tall screen right behind Elias hides him from the OTS camera but not Maya
    placed = scene_with(("screen", "shelf", (0.1, 0.6, 2.2), (0.9, 1.9, 0.0)))
    pl = _shot("two_static", ShotParams(("Elias", "Maya"), framing="OTS_pair", shot_size="MS"), cast, placed)
    assert occlusion_rate([pl], {R1: cast}, placed, REG) == 0.0
    both = occluded_samples(pl.track, placed, list(cast.values()), REG.constants.v_min)
    assert len(both) == len(pl.track.samples)


def _annotated(type_, **specs):
    return AnnotationSet({R1: ClipAnnotation(camera=CameraAnnotation(type_, ("Elias", "Maya"), specs))})


def test_camera_accuracy_matches_template_type():
    cast = {
        "Elias": Behaviour.still("Elias", State.SITTING, (1.0, 2.5), 0.0),
        "Maya": Behaviour.still("Maya", State.STANDING, (3.0, 2.5), math.pi),
    }
    p = ShotParams(("Elias", "Maya"), relation="distant", framing="OTS_pair", shot_size="MS", angle="eye")
    pl = _shot("two_static", p, cast)
    assert camera_template_accuracy([pl], _annotated("two_static")) == 1.0
    assert camera_template_accuracy([pl], _annotated("two_ots")) == 0.0
    specs = dict(relation="distant", framing="OTS_pair", shot_size="MS", angle="Eye")
    assert camera_template_accuracy([pl], _annotated("two_static", **specs), strict=True) == 1.0
    assert camera_template_accuracy([pl], _annotated("two_static", shot_size="LS"), strict=True) == 0.0
    with pytest.raises(MisalignedClips):
        camera_template_accuracy([], _annotated("two_static"))


# report ----------------------------------------------------------------------


def test_report_fields_are_ratios():
    with pytest.raises(ValueError):
        MetricsReport(walk=1.5)
    assert MetricsReport(walk=0.5).present() == {"walk": 0.5}


def test_report_includes_only_available_metrics():
    placed = layout_scene(living_room(), ROOM, seed=7)
    rep = compute_report(placed)
    assert set(rep.present()) == {"object_collision_rate", "walk", "reach"}
    plan = _plan({R1: {"A": 3, "B": 4}})
    rep = compute_report(None, plan)
    assert rep.present() == {"motion_diversity": 1.0}
    assert compute_report().present() == {}
