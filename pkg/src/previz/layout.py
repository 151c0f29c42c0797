"""Scene layout on a hierarchical occupancy grid.

Anchors go on the floor grid, each anchor then exposes a top-surface grid,
and non-anchors land either on that top grid (``on_top_of``) or on the floor.
Every object occupies a block of whole cells with its footprint centred in
the block, so a cell is occupied exactly when a footprint covers its centre
and blocks never share cells.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .geometry import EPS, Rect, axis_cos_sin, footprint, footprint_extents
from .model import (
    Bounds,
    ObjectKind,
    OccupancyGrid,
    PlacedScene,
    Pose,
    Relation,
    SceneGraph,
    SceneObject,
    SpatialRelation,
    validate_scene_graph,
)

DEFAULT_CELL_SIZE = 0.1
ADJACENCY_GAP = 0.4
QUARTER_YAWS = (0.0, math.pi / 2.0, math.pi, 3.0 * math.pi / 2.0)

_OPPOSITE_AXIS = {
    Relation.LEFT_OF: ("x", 1),
    Relation.RIGHT_OF: ("x", -1),
    Relation.IN_FRONT_OF: ("y", 1),
    Relation.BEHIND: ("y", -1),
}


class LayoutError(ValueError):
    pass


class DegenerateBounds(LayoutError):
    pass


class MismatchedObjects(LayoutError):
    pass


class PlacementInfeasible(LayoutError):
    def __init__(self, object_id: str, reason: str = "no free block") -> None:
        super().__init__(f"cannot place {object_id!r}: {reason}")
        self.object_id = object_id


@dataclass(frozen=True)
class ConsensusConfig:
    min_votes: int = 2
    samples: int = 3

    def __post_init__(self) -> None:
        if self.min_votes < 1 or self.samples < self.min_votes:
            raise ValueError("need 1 <= min_votes <= samples")


@dataclass(frozen=True)
class OrnamentRule:
    label: str
    allowed_surface: str  # "floor" | "anchor_top"
    min_clearance: float
    max_count: int
    dims: tuple[float, float, float] = (0.3, 0.3, 0.6)

    def __post_init__(self) -> None:
        if self.max_count < 0:
            raise ValueError("max_count must be >= 0")
        if self.allowed_surface not in ("floor", "anchor_top"):
            raise ValueError(f"unknown surface {self.allowed_surface!r}")


DEFAULT_ORNAMENT_RULES: tuple[OrnamentRule, ...] = (
    OrnamentRule("plant", "floor", 0.3, 2, (0.4, 0.4, 1.1)),
    OrnamentRule("floor_lamp", "floor", 0.3, 1, (0.3, 0.3, 1.6)),
    OrnamentRule("book", "anchor_top", 0.05, 2, (0.15, 0.2, 0.05)),
    OrnamentRule("vase", "anchor_top", 0.1, 1, (0.12, 0.12, 0.3)),
)


def _ceil(x: float) -> int:
    return math.ceil(round(x, 9))


def _floor(x: float) -> int:
    return math.floor(round(x, 9))


def build_floor_grid(bounds: Bounds, cell_size: float = DEFAULT_CELL_SIZE) -> OccupancyGrid:
    if not (cell_size > 0 and math.isfinite(cell_size)):
        raise DegenerateBounds(f"cell_size must be > 0, got {cell_size}")
    if not (bounds.width > 0 and bounds.depth > 0):
        raise DegenerateBounds(f"bounds {bounds} have no area")
    rows = _ceil(bounds.depth / cell_size)
    cols = _ceil(bounds.width / cell_size)
    return OccupancyGrid.empty((bounds.x_min, bounds.y_min), cell_size, rows, cols)


# --------------------------------------------------------------------------
# Consensus
# --------------------------------------------------------------------------


def _orientation(rel: SpatialRelation) -> Optional[tuple[frozenset, str, str]]:
    """Directional claim of a relation as (pair, axis, object that is lower)."""
    info = _OPPOSITE_AXIS.get(rel.relation)
    if info is None:
        return None
    axis, sign = info
    lower = rel.subject if sign > 0 else rel.object
    return (frozenset((rel.subject, rel.object)), axis, lower)


def scene_graph_consensus(samples: Sequence[SceneGraph], cfg: ConsensusConfig) -> SceneGraph:
    """Keep relations asserted by at least ``cfg.min_votes`` samples.

    Opposing directional claims about the same pair (left/right, front/back)
    keep the side with more supporting samples; a tie drops both. Competing
    supports for one object are resolved the same way.
    """
    if not samples:
        raise MismatchedObjects("no samples")
    ids = sorted(samples[0].ids)
    for s in samples[1:]:
        if sorted(s.ids) != ids:
            raise MismatchedObjects("samples disagree on the object id set")

    votes: Counter[SpatialRelation] = Counter()
    order: dict[SpatialRelation, None] = {}
    for s in samples:
        for rel in dict.fromkeys(s.relations):
            votes[rel] += 1
            order.setdefault(rel, None)
    kept = [r for r in order if votes[r] >= cfg.min_votes]

    side_votes: Counter[tuple] = Counter()
    for s in samples:
        claims = {_orientation(r) for r in s.relations} - {None}
        for claim in claims:
            side_votes[claim] += 1
    drop: set[SpatialRelation] = set()
    for r in kept:
        claim = _orientation(r)
        if claim is None:
            continue
        pair, axis, lower = claim
        other = next(iter(pair - {lower}))
        rival = (pair, axis, other)
        rival_kept = any(_orientation(k) == rival for k in kept)
        if rival_kept and side_votes[rival] >= side_votes[claim]:
            drop.add(r)

    support_votes: dict[str, Counter[str]] = {}
    for r in kept:
        if r.relation is Relation.ON_TOP_OF:
            support_votes.setdefault(r.subject, Counter())[r.object] = votes[r]
    for subject, ctr in support_votes.items():
        if len(ctr) < 2:
            continue
        ranked = ctr.most_common()
        best, best_n = ranked[0]
        tie = ranked[1][1] == best_n
        for r in kept:
            if r.relation is Relation.ON_TOP_OF and r.subject == subject and (tie or r.object != best):
                drop.add(r)

    return SceneGraph(samples[0].objects, tuple(r for r in kept if r not in drop))


# --------------------------------------------------------------------------
# Block search
# --------------------------------------------------------------------------


def _integral(cells: np.ndarray) -> np.ndarray:
    occ = cells.astype(np.int64)
    out = np.zeros((occ.shape[0] + 1, occ.shape[1] + 1), dtype=np.int64)
    out[1:, 1:] = occ.cumsum(0).cumsum(1)
    return out


def free_blocks(grid: OccupancyGrid, kr: int, kc: int) -> np.ndarray:
    """Boolean map over block origins: ``True`` where a kr x kc block is all free."""
    R, C = grid.rows, grid.cols
    if kr > R or kc > C or kr < 1 or kc < 1:
        return np.zeros((0, 0), dtype=bool)
    s = _integral(grid.cells)
    total = s[kr:, kc:] - s[:-kr, kc:] - s[kr:, :-kc] + s[:-kr, :-kc]
    return total == 0


@dataclass(frozen=True)
class _Placed:
    rect: Rect
    yaw: float


def block_geometry(grid: OccupancyGrid, dims: Sequence[float], yaw: float) -> tuple[int, int, float, float]:
    ex, ey = footprint_extents(dims, yaw)
    return _ceil(ey / grid.cell_size), _ceil(ex / grid.cell_size), ex, ey


def _relation_mask(
    rel: SpatialRelation,
    me: str,
    cx: np.ndarray,
    cy: np.ndarray,
    ex: float,
    ey: float,
    yaw: float,
    other: _Placed,
) -> np.ndarray:
    o = other.rect
    ocx, ocy = o.center
    if rel.relation is Relation.ADJACENT:
        dx = np.maximum(np.abs(cx - ocx) - (ex / 2.0 + o.width / 2.0), 0.0)
        dy = np.maximum(np.abs(cy - ocy) - (ey / 2.0 + o.depth / 2.0), 0.0)
        return np.sqrt(dx * dx + dy * dy) <= ADJACENCY_GAP + EPS
    if rel.relation is Relation.FACING:
        if rel.subject == me:
            fx, fy = axis_cos_sin(yaw)
            return fx * (ocx - cx) + fy * (ocy - cy) > EPS
        fx, fy = axis_cos_sin(other.yaw)
        return fx * (cx - ocx) + fy * (cy - ocy) > EPS
    info = _OPPOSITE_AXIS.get(rel.relation)
    if info is None:
        return np.zeros(cx.shape, dtype=bool)
    axis, sign = info
    mine, theirs = (cx, ocx) if axis == "x" else (cy, ocy)
    if rel.subject != me:
        sign = -sign
    # sign > 0: this object must be on the low side of the other
    return (theirs - mine > EPS) if sign > 0 else (mine - theirs > EPS)


def relation_satisfied(rel: SpatialRelation, a: _Placed, b: _Placed) -> bool:
    """Check ``rel`` with subject placed as ``a`` and object as ``b``."""
    ax, ay = a.rect.center
    m = _relation_mask(
        rel, rel.subject, np.array([ax]), np.array([ay]), a.rect.width, a.rect.depth, a.yaw, b
    )
    return bool(m[0])


@dataclass(frozen=True)
class _Hit:
    row: int
    col: int
    kr: int
    kc: int
    cx: float
    cy: float
    yaw: float
    score: int


def _search(
    obj: SceneObject,
    grid: OccupancyGrid,
    surface: Rect,
    relations: Iterable[tuple[SpatialRelation, _Placed]],
) -> Optional["_Hit"]:
    """Best block for ``obj``: most satisfied relations, then lowest (row, col), then yaw order."""
    relations = list(relations)
    cs = grid.cell_size
    ox, oy = grid.origin
    best = None  # (-score, r, c, yaw_index)
    hit = None
    for k, yaw in enumerate(QUARTER_YAWS):
        kr, kc, ex, ey = block_geometry(grid, obj.dims, yaw)
        mask = free_blocks(grid, kr, kc)
        if mask.size == 0:
            continue
        rr, cc = np.nonzero(mask)
        if rr.size == 0:
            continue
        cx = ox + (cc + kc / 2.0) * cs
        cy = oy + (rr + kr / 2.0) * cs
        inside = (
            (cx - ex / 2.0 >= surface.x0 - EPS)
            & (cx + ex / 2.0 <= surface.x1 + EPS)
            & (cy - ey / 2.0 >= surface.y0 - EPS)
            & (cy + ey / 2.0 <= surface.y1 + EPS)
        )
        if not inside.any():
            continue
        rr, cc, cx, cy = rr[inside], cc[inside], cx[inside], cy[inside]
        score = np.zeros(rr.shape, dtype=np.int64)
        for rel, other in relations:
            score += _relation_mask(rel, obj.id, cx, cy, ex, ey, yaw, other)
        top = int(score.max())
        # np.nonzero yields row-major order, so the first hit is the lowest (row, col)
        i = int(np.flatnonzero(score == top)[0])
        cand = (-top, int(rr[i]), int(cc[i]), k)
        if best is None or cand < best:
            best = cand
            hit = _Hit(int(rr[i]), int(cc[i]), kr, kc, float(cx[i]), float(cy[i]), yaw, top)
    return hit


def _placed_lookup(placed: PlacedScene) -> dict[str, _Placed]:
    return {oid: _Placed(placed.footprint(oid), placed.poses[oid].yaw) for oid in placed.poses}


def _relevant(g: SceneGraph, oid: str, done: dict[str, _Placed]) -> list[tuple[SpatialRelation, _Placed]]:
    out = []
    for rel in g.relations:
        if rel.relation is Relation.ON_TOP_OF:
            continue
        if rel.subject == oid and rel.object in done:
            out.append((rel, done[rel.object]))
        elif rel.object == oid and rel.subject in done:
            out.append((rel, done[rel.subject]))
    return out


def _by_area(objs: Iterable[SceneObject]) -> list[SceneObject]:
    return sorted(objs, key=lambda o: (-(o.dims[0] * o.dims[1]), o.id))


def init_top_grid(obj: SceneObject, top: Rect, cell_size: float) -> OccupancyGrid:
    """Grid of whole cells centred on an anchor's top surface."""
    cs = min(cell_size, top.width, top.depth)
    cols = max(_floor(top.width / cs), 1)
    rows = max(_floor(top.depth / cs), 1)
    ox = top.x0 + (top.width - cols * cs) / 2.0
    oy = top.y0 + (top.depth - rows * cs) / 2.0
    return OccupancyGrid.empty((ox, oy), cs, rows, cols)


def place_anchors(
    g: SceneGraph,
    grid: OccupancyGrid,
    seed: int = 0,
    *,
    bounds: Optional[Bounds] = None,
) -> PlacedScene:
    """Place every anchor on the floor grid, largest footprint first.

    The scan is deterministic; ``seed`` is accepted for interface symmetry
    with the other stages and does not change the result.
    """
    problems = validate_scene_graph(g)
    if problems:
        raise LayoutError(f"invalid scene graph: {problems[0].detail}")
    if bounds is None:
        ext = grid.extent
        bounds = Bounds(ext.x0, ext.y0, ext.x1, ext.y1)
    surface = bounds.rect
    done: dict[str, _Placed] = {}
    poses: dict[str, Pose] = {}
    tops: dict[str, OccupancyGrid] = {}
    for obj in _by_area(o for o in g.objects if o.kind is ObjectKind.ANCHOR):
        hit = _search(obj, grid, surface, _relevant(g, obj.id, done))
        if hit is None:
            raise PlacementInfeasible(obj.id)
        grid = grid.with_block(hit.row, hit.col, hit.kr, hit.kc)
        poses[obj.id] = Pose((hit.cx, hit.cy), hit.yaw, 0.0)
        rect = footprint((hit.cx, hit.cy), hit.yaw, obj.dims)
        done[obj.id] = _Placed(rect, hit.yaw)
        tops[obj.id] = init_top_grid(obj, rect, grid.cell_size)
    return PlacedScene(bounds, g, poses, grid, tops)


def place_non_anchors(g: SceneGraph, placed: PlacedScene, seed: int = 0) -> PlacedScene:
    """Place non-anchors on their supporting anchor's top grid or on the floor."""
    missing = [o.id for o in g.objects if o.kind is ObjectKind.ANCHOR and o.id not in placed.poses]
    if missing:
        raise LayoutError(f"anchors not placed: {', '.join(missing)}")
    done = _placed_lookup(placed)
    poses = dict(placed.poses)
    floor = placed.floor_grid
    tops = dict(placed.top_grids)
    for obj in _by_area(o for o in g.objects if o.kind is ObjectKind.NON_ANCHOR):
        if obj.id in poses:
            continue
        support = g.support_of(obj.id)
        if support is not None:
            grid = tops[support]
            surface = done[support].rect
            height = poses[support].support_height + g.object(support).dims[2]
        else:
            grid, surface, height = floor, placed.bounds.rect, 0.0
        hit = _search(obj, grid, surface, _relevant(g, obj.id, done))
        if hit is None:
            where = f"top of {support!r}" if support else "floor"
            raise PlacementInfeasible(obj.id, f"no free block on {where}")
        grid = grid.with_block(hit.row, hit.col, hit.kr, hit.kc)
        if support is not None:
            tops[support] = grid
        else:
            floor = grid
        poses[obj.id] = Pose((hit.cx, hit.cy), hit.yaw, height)
        done[obj.id] = _Placed(footprint((hit.cx, hit.cy), hit.yaw, obj.dims), hit.yaw)
    return replace(placed, scene_graph=g, poses=poses, floor_grid=floor, top_grids=tops)


def layout_scene(
    g: SceneGraph,
    bounds: Bounds,
    *,
    cell_size: float = DEFAULT_CELL_SIZE,
    seed: int = 0,
    ornament_rules: Optional[Sequence[OrnamentRule]] = None,
    ornament_suggestions: Optional[Sequence[str]] = None,
) -> PlacedScene:
    grid = build_floor_grid(bounds, cell_size)
    placed = place_anchors(g, grid, seed, bounds=bounds)
    placed = place_non_anchors(g, placed, seed)
    if ornament_rules is not None or ornament_suggestions is not None:
        placed = enhance_ornaments(placed, ornament_rules, ornament_suggestions)
    return placed


# --------------------------------------------------------------------------
# Ornaments
# --------------------------------------------------------------------------


def _clear_of(rect: Rect, others: Iterable[Rect], clearance: float) -> bool:
    return all(rect.distance_to_rect(o) >= clearance - EPS for o in others)


def _ornament_candidates(
    grid: OccupancyGrid, surface: Rect, dims: Sequence[float]
) -> list[tuple[float, int, int, int, int, float, float]]:
    """Free blocks on ``surface`` as (wall distance, row, col, kr, kc, cx, cy)."""
    cs = grid.cell_size
    ox, oy = grid.origin
    kr, kc, ex, ey = block_geometry(grid, dims, 0.0)
    mask = free_blocks(grid, kr, kc)
    out = []
    if mask.size == 0:
        return out
    for r, c in zip(*np.nonzero(mask)):
        cx = float(ox + (c + kc / 2.0) * cs)
        cy = float(oy + (r + kr / 2.0) * cs)
        rect = Rect(cx - ex / 2.0, cy - ey / 2.0, cx + ex / 2.0, cy + ey / 2.0)
        if not surface.contains_rect(rect):
            continue
        wall = min(rect.x0 - surface.x0, surface.x1 - rect.x1, rect.y0 - surface.y0, surface.y1 - rect.y1)
        out.append((round(wall, 9), int(r), int(c), kr, kc, cx, cy))
    out.sort(key=lambda t: (t[0], t[1], t[2]))
    return out


def enhance_ornaments(
    placed: PlacedScene,
    rules: Optional[Sequence[OrnamentRule]] = None,
    suggestions: Optional[Sequence[str]] = None,
) -> PlacedScene:
    """Add decorative objects into free cells that satisfy their rule.

    With ``suggestions`` each listed label is one placement attempt (capped by
    its rule's ``max_count``); otherwise every rule is tried ``max_count``
    times. Floor ornaments prefer spots closest to a wall. Failed attempts are
    skipped.
    """
    rules = DEFAULT_ORNAMENT_RULES if rules is None else tuple(rules)
    by_label = {r.label: r for r in rules}
    if suggestions is None:
        attempts = [r.label for r in rules for _ in range(r.max_count)]
    else:
        attempts = [s for s in suggestions if s in by_label]
    if not attempts:
        return placed

    g = placed.scene_graph
    objects = list(g.objects)
    relations = list(g.relations)
    poses = dict(placed.poses)
    floor = placed.floor_grid
    tops = dict(placed.top_grids)
    used: Counter[str] = Counter()
    taken_ids = set(g.ids)

    def rects_on(support: Optional[str]) -> list[Rect]:
        graph = SceneGraph(tuple(objects), tuple(relations))
        scene = replace(placed, scene_graph=graph, poses=poses)
        return [scene.footprint(oid) for oid in poses if graph.support_of(oid) == support]

    for label in attempts:
        rule = by_label[label]
        if used[label] >= rule.max_count:
            continue
        n = 1
        while f"ornament_{label}_{n}" in taken_ids:
            n += 1
        oid = f"ornament_{label}_{n}"
        obj = SceneObject(oid, label, ObjectKind.ORNAMENT, tuple(float(d) for d in rule.dims))
        if rule.allowed_surface == "floor":
            surfaces = [(None, floor, placed.bounds.rect, 0.0)]
        else:
            anchors = [o for o in objects if o.kind is ObjectKind.ANCHOR and o.id in tops]
            surfaces = []
            for a in sorted(anchors, key=lambda o: o.id):
                top_rect = footprint(poses[a.id].position, poses[a.id].yaw, a.dims)
                surfaces.append((a.id, tops[a.id], top_rect, poses[a.id].support_height + a.dims[2]))
        done = False
        for support, grid, surface, height in surfaces:
            others = rects_on(support)
            for _, r, c, kr, kc, cx, cy in _ornament_candidates(grid, surface, obj.dims):
                rect = footprint((cx, cy), 0.0, obj.dims)
                if not _clear_of(rect, others, rule.min_clearance):
                    continue
                grid = grid.with_block(r, c, kr, kc)
                if support is None:
                    floor = grid
                else:
                    tops[support] = grid
                    relations.append(SpatialRelation(oid, Relation.ON_TOP_OF, support))
                objects.append(obj)
                poses[oid] = Pose((cx, cy), 0.0, height)
                taken_ids.add(oid)
                used[label] += 1
                done = True
                break
            if done:
                break

    graph = SceneGraph(tuple(objects), tuple(relations))
    return replace(placed, scene_graph=graph, poses=poses, floor_grid=floor, top_grids=tops)


# --------------------------------------------------------------------------
# Checks used by tests and metrics
# --------------------------------------------------------------------------


def occupancy_from_footprints(grid: OccupancyGrid, rects: Iterable[Rect]) -> np.ndarray:
    """Cells whose centre lies inside (or on the edge of) any rectangle."""
    cs = grid.cell_size
    ox, oy = grid.origin
    xs = ox + (np.arange(grid.cols) + 0.5) * cs
    ys = oy + (np.arange(grid.rows) + 0.5) * cs
    X, Y = np.meshgrid(xs, ys)
    occ = np.zeros(grid.cells.shape, dtype=bool)
    for r in rects:
        occ |= (X >= r.x0 - EPS) & (X <= r.x1 + EPS) & (Y >= r.y0 - EPS) & (Y <= r.y1 + EPS)
    return occ


def relation_report(placed: PlacedScene) -> list[tuple[SpatialRelation, bool]]:
    """Each non-support relation with whether the final layout satisfies it."""
    done = _placed_lookup(placed)
    out = []
    for rel in placed.scene_graph.relations:
        if rel.relation is Relation.ON_TOP_OF:
            ok = placed.footprint(rel.object).contains_rect(placed.footprint(rel.subject))
        else:
            ok = relation_satisfied(rel, done[rel.subject], done[rel.object])
        out.append((rel, ok))
    return out

