import itertools
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from previz.layout import (
    ConsensusConfig,
    DegenerateBounds,
    MismatchedObjects,
    OrnamentRule,
    PlacementInfeasible,
    build_floor_grid,
    enhance_ornaments,
    free_blocks,
    layout_scene,
    occupancy_from_footprints,
    place_anchors,
    place_non_anchors,
    relation_report,
    scene_graph_consensus,
)
from previz.model import Bounds, ObjectKind, OccupancyGrid, Relation, SceneGraph, SceneObject, SpatialRelation
from scenes import ROOM, living_room, random_graph


def anchor(oid, w, d, h=1.0, label="box"):
    return SceneObject(oid, label, ObjectKind.ANCHOR, (w, d, h))


def item(oid, w, d, h=0.2, label="thing"):
    return SceneObject(oid, label, ObjectKind.NON_ANCHOR, (w, d, h))


def ceil_cells(length, cs):
    # exact rational ceil over the decimal literals
    q = Fraction(str(length)) / Fraction(str(cs))
    return -(-q.numerator // q.denominator)


@pytest.mark.parametrize(
    "w, d, cs",
    [(5.0, 5.0, 0.1), (1.0, 1.0, 1.0), (3.05, 2.0, 0.1), (2.7, 0.3, 0.1), (4.2, 3.3, 0.3)],
)
def test_floor_grid_size_matches_exact_ceil(w, d, cs):
    g = build_floor_grid(Bounds(0, 0, w, d), cs)
    assert (g.rows, g.cols) == (ceil_cells(d, cs), ceil_cells(w, cs))
    assert g.free_count == g.rows * g.cols


def test_floor_grid_frozen_values():
    assert (build_floor_grid(Bounds(0, 0, 3.05, 2.0), 0.1).cols, build_floor_grid(Bounds(0, 0, 3.05, 2.0), 0.1).rows) == (31, 20)
    assert build_floor_grid(Bounds(0, 0, 1, 1), 1.0).cells.shape == (1, 1)


def test_degenerate_bounds():
    with pytest.raises(DegenerateBounds):
        build_floor_grid(Bounds(0, 0, 0, 2), 0.1)
    with pytest.raises(DegenerateBounds):
        build_floor_grid(ROOM, 0.0)


@given(st.integers(1, 7), st.integers(1, 7), st.integers(1, 4), st.integers(1, 4), st.data())
def test_free_blocks_matches_direct_scan(rows, cols, kr, kc, data):
    cells = np.array(data.draw(st.lists(st.booleans(), min_size=rows * cols, max_size=rows * cols))).reshape(rows, cols)
    grid = OccupancyGrid((0, 0), 1.0, cells)
    got = free_blocks(grid, kr, kc)
    want = np.zeros((max(rows - kr + 1, 0), max(cols - kc + 1, 0)), dtype=bool)
    for r in range(want.shape[0]):
        for c in range(want.shape[1]):
            want[r, c] = not cells[r : r + kr, c : c + kc].any()
    if want.size == 0:
        assert got.size == 0
    else:
        assert np.array_equal(got, want)


# consensus -----------------------------------------------------------------

PAIR = (anchor("A", 1, 1), anchor("B", 1, 1))


def graph(*rels):
    return SceneGraph(PAIR, tuple(SpatialRelation(*r) for r in rels))


def test_consensus_keeps_majority_and_drops_minority():
    adj = ("A", Relation.ADJACENT, "B")
    face = ("A", Relation.FACING, "B")
    samples = [graph(adj, face), graph(adj), graph(adj)]
    out = scene_graph_consensus(samples, ConsensusConfig(2, 3))
    assert out.relations == (SpatialRelation(*adj),)


def test_consensus_contradiction_keeps_higher_vote():
    left = ("A", Relation.LEFT_OF, "B")
    right = ("A", Relation.RIGHT_OF, "B")
    out = scene_graph_consensus([graph(left), graph(left), graph(right)], ConsensusConfig(2, 3))
    assert out.relations == (SpatialRelation(*left),)


def test_consensus_tie_drops_both_sides():
    left = ("A", Relation.LEFT_OF, "B")
    right = ("A", Relation.RIGHT_OF, "B")
    samples = [graph(left), graph(left), graph(right), graph(right)]
    assert scene_graph_consensus(samples, ConsensusConfig(2, 4)).relations == ()


def test_consensus_vote_count_oracle():
    pool = [("A", r, "B") for r in (Relation.ADJACENT, Relation.FACING, Relation.BEHIND)]
    rng = random.Random(3)
    for _ in range(50):
        samples = [graph(*[r for r in pool if rng.random() < 0.5]) for _ in range(5)]
        k = rng.randint(1, 5)
        votes = {r: sum(SpatialRelation(*r) in s.relations for s in samples) for r in pool}
        out = scene_graph_consensus(samples, ConsensusConfig(k, 5))
        assert set(out.relations) == {SpatialRelation(*r) for r, v in votes.items() if v >= k}


def test_consensus_rejects_mismatched_objects():
    other = SceneGraph((anchor("A", 1, 1),))
    with pytest.raises(MismatchedObjects):
        scene_graph_consensus([graph(), other], ConsensusConfig(1, 2))


def test_consensus_config_bounds():
    with pytest.raises(ValueError):
        ConsensusConfig(3, 2)
    with pytest.raises(ValueError):
        ConsensusConfig(0, 2)


# placement -----------------------------------------------------------------


def test_single_anchor_occupies_ten_by_five_cells():
    g = SceneGraph((anchor("desk", 1.0, 0.5),))
    placed = place_anchors(g, build_floor_grid(ROOM), seed=0, bounds=ROOM)
    assert placed.floor_grid.cells.sum() == 50
    rows, cols = np.nonzero(placed.floor_grid.cells)
    assert (np.ptp(rows) + 1, np.ptp(cols) + 1) in {(5, 10), (10, 5)}
    assert "desk" in placed.top_grids


def test_anchors_exceeding_floor_are_infeasible():
    g = SceneGraph((anchor("a", 4.0, 4.0), anchor("b", 3.0, 3.0)))
    with pytest.raises(PlacementInfeasible) as info:
        place_anchors(g, build_floor_grid(ROOM), bounds=ROOM)
    assert info.value.object_id == "b"


def test_three_pairwise_adjacent_anchors():
    objs = (anchor("a", 1.0, 0.6), anchor("b", 0.8, 0.8), anchor("c", 1.2, 0.5))
    rels = tuple(SpatialRelation(x, Relation.ADJACENT, y) for x, y in itertools.combinations("abc", 2))
    placed = place_anchors(SceneGraph(objs, rels), build_floor_grid(ROOM), bounds=ROOM)
    rects = {o: placed.footprint(o) for o in "abc"}
    for x, y in itertools.combinations("abc", 2):
        gap = rects[x].distance_to_rect(rects[y])
        assert gap <= 0.4 + 1e-9
        assert not rects[x].overlaps(rects[y])
    assert placed.floor_grid.cells.sum() == sum(
        math.ceil(round(r.width / 0.1, 9)) * math.ceil(round(r.depth / 0.1, 9)) for r in rects.values()
    )


def test_lamp_sits_inside_desk_top():
    g = SceneGraph(
        (anchor("desk", 1.2, 0.6, 0.75), item("lamp", 0.2, 0.2, 0.4)),
        (SpatialRelation("lamp", Relation.ON_TOP_OF, "desk"),),
    )
    placed = layout_scene(g, ROOM)
    assert placed.footprint("desk").contains_rect(placed.footprint("lamp"))
    assert placed.poses["lamp"].support_height == pytest.approx(0.75)
    assert placed.floor_grid.cells.sum() == 72


def test_unrelated_non_anchor_goes_on_the_floor():
    g = SceneGraph((anchor("desk", 1.2, 0.6), item("bin", 0.3, 0.3)))
    placed = layout_scene(g, ROOM)
    assert placed.poses["bin"].support_height == 0.0
    assert not placed.footprint("bin").overlaps(placed.footprint("desk"))
    assert placed.floor_grid.cells.sum() == 72 + 9


def test_full_desk_top_rejects_next_item():
    # a 0.6 m top holds 36 cells; four 3x3 items fill it, the fifth cannot fit
    objs = [anchor("desk", 0.6, 0.6, 0.7)] + [item(f"i{k}", 0.3, 0.3) for k in range(5)]
    rels = [SpatialRelation(f"i{k}", Relation.ON_TOP_OF, "desk") for k in range(5)]
    capacity = (6 * 6) // (3 * 3)
    g4 = SceneGraph(tuple(objs[:capacity + 1]), tuple(rels[:capacity]))
    placed = layout_scene(g4, ROOM)
    assert placed.top_grids["desk"].free_count == 0
    with pytest.raises(PlacementInfeasible) as info:
        layout_scene(SceneGraph(tuple(objs), tuple(rels)), ROOM)
    assert info.value.object_id == "i4"


def test_place_non_anchors_needs_anchors():
    g = living_room()
    with pytest.raises(Exception):
        place_non_anchors(g, place_anchors(SceneGraph(g.objects[:1]), build_floor_grid(ROOM), bounds=ROOM))


def _check_layout(placed):
    ids = placed.placed_ids()
    assert set(ids) == set(placed.scene_graph.ids)
    area = placed.bounds.rect
    for oid in ids:
        rect = placed.footprint(oid)
        support = placed.scene_graph.support_of(oid)
        surface = area if support is None else placed.footprint(support)
        assert surface.contains_rect(rect)
        assert 0 <= placed.poses[oid].yaw < 2 * math.pi
    floor = placed.floor_ids()
    for a, b in itertools.combinations(floor, 2):
        assert not placed.footprint(a).overlaps(placed.footprint(b))
    expect = occupancy_from_footprints(placed.floor_grid, [placed.footprint(o) for o in floor])
    assert np.array_equal(expect, placed.floor_grid.cells)


def test_random_layouts_keep_invariants():
    rng = random.Random(11)
    for seed in range(30):
        g = random_graph(rng, 6)
        try:
            placed = layout_scene(g, ROOM, seed=seed)
        except PlacementInfeasible:
            continue
        _check_layout(placed)
        assert layout_scene(g, ROOM, seed=seed) == placed


def test_relations_are_satisfied_in_the_living_room():
    placed = layout_scene(living_room(), ROOM, seed=7)
    _check_layout(placed)
    assert all(ok for _, ok in relation_report(placed))


# ornaments -----------------------------------------------------------------


def test_floor_plants_respect_clearance():
    placed = layout_scene(living_room(), ROOM)
    rule = OrnamentRule("plant", "floor", 0.3, 2, (0.4, 0.4, 1.0))
    out = enhance_ornaments(placed, [rule])
    added = [o for o in out.placed_ids() if o not in placed.poses]
    assert 1 <= len(added) <= 2
    # distance-transform oracle at 1 cm resolution around prior obstacles
    fine = 0.01
    n = int(round(5.0 / fine))
    occ = np.zeros((n, n), dtype=bool)
    xs = (np.arange(n) + 0.5) * fine
    X, Y = np.meshgrid(xs, xs)
    for oid in placed.floor_ids():
        r = placed.footprint(oid)
        occ |= (X >= r.x0) & (X <= r.x1) & (Y >= r.y0) & (Y <= r.y1)
    dist = ndimage.distance_transform_edt(~occ) * fine
    for oid in added:
        r = out.footprint(oid)
        inside = (X >= r.x0) & (X <= r.x1) & (Y >= r.y0) & (Y <= r.y1)
        assert dist[inside].min() >= 0.3 - 2 * fine
    assert not (placed.floor_grid.cells & ~out.floor_grid.cells).any()
    for oid, pose in placed.poses.items():
        assert out.poses[oid] == pose


def test_zero_count_rules_leave_scene_unchanged():
    placed = layout_scene(living_room(), ROOM)
    assert enhance_ornaments(placed, [OrnamentRule("plant", "floor", 0.3, 0)]) == placed


def test_full_floor_leaves_scene_unchanged():
    g = SceneGraph((anchor("slab", 5.0, 5.0, 0.1),))
    placed = layout_scene(g, ROOM)
    assert placed.floor_grid.free_count == 0
    assert enhance_ornaments(placed, [OrnamentRule("plant", "floor", 0.0, 3)]) == placed


def test_suggestions_pick_rules_by_label():
    placed = layout_scene(living_room(), ROOM)
    out = enhance_ornaments(placed, suggestions=["book", "unknown", "plant"])
    labels = sorted(out.scene_graph.object(o).label for o in out.placed_ids() if o not in placed.poses)
    assert labels == ["book", "plant"]
    book = next(o for o in out.placed_ids() if out.scene_graph.object(o).label == "book")
    support = out.scene_graph.support_of(book)
    assert support is not None and out.footprint(support).contains_rect(out.footprint(book))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_layout_is_deterministic(seed):
    g = random_graph(random.Random(seed), 5)
    try:
        a = layout_scene(g, ROOM, seed=seed)
    except PlacementInfeasible:
        return
    assert layout_scene(g, ROOM, seed=seed) == a
