"""Performing-region scoring and selection, plus seat inference.

A candidate region is an obstacle-free square of whole floor cells. Its loss
adds a wall-proximity term, an obstacle-proximity term and a camera-visibility
term. The batch evaluator and the single-candidate path share the same scalar
arithmetic so their results agree bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .geometry import GRAZE, Box3, Rect, axis_cos_sin, segment_hits_box
from .layout import free_blocks
from .model import Bounds, ObjectKind, PlacedScene, SceneObject

STANDING_PROXY_HEIGHTS = (0.2, 0.6, 1.0, 1.4, 1.7)
SITTING_PROXY_HEIGHTS = (0.2, 0.45, 0.7, 0.95, 1.2)
CAMERA_HEIGHT = 2.2
AIM_HEIGHT = 1.2

SITTABLE_KEYWORDS = (
    "armchair",
    "bench",
    "chair",
    "couch",
    "loveseat",
    "ottoman",
    "pouf",
    "recliner",
    "seat",
    "sofa",
    "stool",
)


@dataclass(frozen=True)
class RegionLossParams:
    w_b: float = 1.0
    w_o: float = 1.0
    w_c: float = 1.0
    sigma_b: float = 0.5
    sigma_o: float = 0.3
    s_max: float = 0.9
    alpha_cam: float = 2.0
    tau: float = 0.5
    region_size: float = 0.6
    parcel_size: float = 1.0

    def __post_init__(self) -> None:
        for name in ("w_b", "w_o", "w_c", "sigma_b", "sigma_o", "s_max", "alpha_cam", "region_size", "parcel_size"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v}")
        if self.s_max > 1.0:
            raise ValueError("s_max must be <= 1")
        # tau = 0 is allowed: it simply selects nothing
        if not (math.isfinite(self.tau) and self.tau >= 0):
            raise ValueError("tau must be >= 0")


@dataclass(frozen=True)
class CandidateRegion:
    center: tuple[float, float]
    footprint: Rect
    parcel_index: tuple[int, int]
    cell: tuple[int, int]
    loss: Optional[float] = None


@dataclass(frozen=True)
class VisibilityCamera:
    position: tuple[float, float, float]
    look_at: tuple[float, float, float]

    def __post_init__(self) -> None:
        if tuple(self.position) == tuple(self.look_at):
            raise ValueError("camera position and look_at coincide")


@dataclass(frozen=True)
class SeatSpot:
    object_id: str
    point: tuple[float, float]
    yaw: float


@dataclass(frozen=True)
class FunctionalMap:
    standing_regions: Mapping[tuple[int, int], CandidateRegion]
    sittable_spots: tuple[SeatSpot, ...] = ()
    tau: float = RegionLossParams.tau

    def region_list(self) -> list[CandidateRegion]:
        return [self.standing_regions[k] for k in sorted(self.standing_regions)]

    def seat(self, object_id: str) -> SeatSpot:
        for s in self.sittable_spots:
            if s.object_id == object_id:
                return s
        raise KeyError(object_id)


def default_cameras(bounds: Bounds) -> tuple[VisibilityCamera, ...]:
    """One camera per floor corner, aimed at the floor centroid."""
    cx, cy = bounds.center
    aim = (cx, cy, AIM_HEIGHT)
    corners = (
        (bounds.x_min, bounds.y_min),
        (bounds.x_max, bounds.y_min),
        (bounds.x_max, bounds.y_max),
        (bounds.x_min, bounds.y_max),
    )
    return tuple(VisibilityCamera((x, y, CAMERA_HEIGHT), aim) for x, y in corners)


def _region_cells(placed: PlacedScene, p: RegionLossParams) -> int:
    cs = placed.floor_grid.cell_size
    k = round(p.region_size / cs)
    if k < 1 or abs(k * cs - p.region_size) > 1e-9:
        raise ValueError(f"region_size {p.region_size} is not a whole number of {cs} m cells")
    return k


def parcel_of(bounds: Bounds, point: Sequence[float], parcel_size: float) -> tuple[int, int]:
    r = math.floor(round((point[1] - bounds.y_min) / parcel_size, 9))
    c = math.floor(round((point[0] - bounds.x_min) / parcel_size, 9))
    return (r, c)


def enumerate_candidates(placed: PlacedScene, p: RegionLossParams) -> list[CandidateRegion]:
    """All free region-size squares at cell granularity, row-major by origin cell."""
    grid = placed.floor_grid
    k = _region_cells(placed, p)
    mask = free_blocks(grid, k, k)
    if mask.size == 0:
        return []
    cs = grid.cell_size
    ox, oy = grid.origin
    half = p.region_size / 2.0
    area = placed.bounds.rect
    out = []
    for r, c in zip(*np.nonzero(mask)):
        r, c = int(r), int(c)
        cx = ox + c * cs + half
        cy = oy + r * cs + half
        rect = Rect(cx - half, cy - half, cx + half, cy + half)
        if not area.contains_rect(rect):
            continue
        out.append(CandidateRegion((cx, cy), rect, parcel_of(placed.bounds, (cx, cy), p.parcel_size), (r, c)))
    return out


def _boxes(placed: PlacedScene, ignore: Iterable[str] = ()) -> list[Box3]:
    skip = set(ignore)
    return [b for oid, b in placed.boxes() if oid not in skip]


def visibility_ratio(
    c: Sequence[float],
    cam: VisibilityCamera,
    placed: PlacedScene,
    heights: Sequence[float] = STANDING_PROXY_HEIGHTS,
    ignore: Iterable[str] = (),
) -> float:
    """Fraction of proxy points above ``c`` with an unobstructed segment to the camera."""
    boxes = _boxes(placed, ignore)
    clear = 0
    for h in heights:
        p = (c[0], c[1], h)
        if not any(segment_hits_box(p, cam.position, b) for b in boxes):
            clear += 1
    return clear / len(heights)


def mean_visibility(ratios: Sequence[float]) -> float:
    total = 0.0
    for r in ratios:
        total += r
    return total / len(ratios)


def loss_from_terms(d_b: float, d_o: float, s_bar: float, p: RegionLossParams) -> float:
    boundary = p.w_b * math.exp(-d_b / p.sigma_b)
    obstacle = p.w_o * math.exp(-d_o / p.sigma_o) if math.isfinite(d_o) else 0.0
    camera = p.w_c * (1.0 - min(s_bar, p.s_max)) ** p.alpha_cam
    return boundary + obstacle + camera


def boundary_distance(bounds: Bounds, c: Sequence[float]) -> float:
    return min(c[0] - bounds.x_min, bounds.x_max - c[0], c[1] - bounds.y_min, bounds.y_max - c[1])


def obstacle_distance(placed: PlacedScene, c: Sequence[float]) -> float:
    """Planar distance to the nearest object footprint; ``inf`` in an empty room."""
    best = math.inf
    for _, rect in placed.footprints():
        d = rect.distance_to_point(c)
        if d < best:
            best = d
    return best


def region_loss(
    r: CandidateRegion,
    p: RegionLossParams,
    placed: PlacedScene,
    cams: Sequence[VisibilityCamera],
) -> float:
    s_bar = mean_visibility([visibility_ratio(r.center, cam, placed) for cam in cams])
    return loss_from_terms(boundary_distance(placed.bounds, r.center), obstacle_distance(placed, r.center), s_bar, p)


# --------------------------------------------------------------------------
# Batch evaluation
# --------------------------------------------------------------------------


def _segments_blocked(starts: np.ndarray, end: Sequence[float], boxes: Sequence[Box3]) -> np.ndarray:
    """Vectorised twin of :func:`segment_hits_box` for many starts and one end point."""
    n = starts.shape[0]
    blocked = np.zeros(n, dtype=bool)
    q = np.asarray(end, dtype=float)
    d = q[None, :] - starts
    for box in boxes:
        lo = np.array(box.lo())
        hi = np.array(box.hi())
        t_enter = np.zeros(n)
        t_exit = np.ones(n)
        miss = np.zeros(n, dtype=bool)
        for ax in range(3):
            a = starts[:, ax]
            da = d[:, ax]
            flat = da == 0.0
            miss |= flat & ((a < lo[ax]) | (a > hi[ax]))
            safe = np.where(flat, 1.0, da)
            with np.errstate(over="ignore"):
                t0 = (lo[ax] - a) / safe
                t1 = (hi[ax] - a) / safe
            near = np.minimum(t0, t1)
            far = np.maximum(t0, t1)
            t_enter = np.where(flat, t_enter, np.maximum(t_enter, near))
            t_exit = np.where(flat, t_exit, np.minimum(t_exit, far))
        blocked |= ~miss & (t_exit - t_enter > GRAZE)
    return blocked


def visibility_counts(
    centers: np.ndarray,
    cam: VisibilityCamera,
    placed: PlacedScene,
    heights: Sequence[float] = STANDING_PROXY_HEIGHTS,
    ignore: Iterable[str] = (),
) -> np.ndarray:
    """Number of clear proxy points per centre for one camera."""
    boxes = _boxes(placed, ignore)
    counts = np.zeros(centers.shape[0], dtype=np.int64)
    for h in heights:
        starts = np.column_stack([centers[:, 0], centers[:, 1], np.full(centers.shape[0], float(h))])
        counts += ~_segments_blocked(starts, cam.position, boxes)
    return counts


def score_candidates(
    cands: Sequence[CandidateRegion],
    p: RegionLossParams,
    placed: PlacedScene,
    cams: Sequence[VisibilityCamera],
) -> list[CandidateRegion]:
    """Attach the loss to every candidate using array arithmetic for the geometry."""
    if not cands:
        return []
    centers = np.array([c.center for c in cands], dtype=float)
    b = placed.bounds
    d_b = np.minimum.reduce(
        [centers[:, 0] - b.x_min, b.x_max - centers[:, 0], centers[:, 1] - b.y_min, b.y_max - centers[:, 1]]
    )
    d_o = np.full(len(cands), math.inf)
    for _, rect in placed.footprints():
        dx = np.maximum(np.maximum(rect.x0 - centers[:, 0], 0.0), centers[:, 0] - rect.x1)
        dy = np.maximum(np.maximum(rect.y0 - centers[:, 1], 0.0), centers[:, 1] - rect.y1)
        d_o = np.minimum(d_o, np.sqrt(dx * dx + dy * dy))
    n_heights = len(STANDING_PROXY_HEIGHTS)
    counts = [visibility_counts(centers, cam, placed) for cam in cams]
    out = []
    for i, cand in enumerate(cands):
        s_bar = mean_visibility([int(cnt[i]) / n_heights for cnt in counts])
        loss = loss_from_terms(float(d_b[i]), float(d_o[i]), s_bar, p)
        out.append(replace(cand, loss=loss))
    return out


def select_performing_regions(
    placed: PlacedScene,
    p: RegionLossParams,
    cams: Optional[Sequence[VisibilityCamera]] = None,
) -> dict[tuple[int, int], CandidateRegion]:
    """Per parcel, the strictly lowest-loss candidate below ``p.tau``."""
    cams = default_cameras(placed.bounds) if cams is None else cams
    best: dict[tuple[int, int], CandidateRegion] = {}
    # candidates arrive in row-major origin order, so strict < keeps the lowest (row, col) on ties
    for cand in score_candidates(enumerate_candidates(placed, p), p, placed, cams):
        if not cand.loss < p.tau:
            continue
        cur = best.get(cand.parcel_index)
        if cur is None or cand.loss < cur.loss:
            best[cand.parcel_index] = cand
    return dict(sorted(best.items()))


# --------------------------------------------------------------------------
# Seats and the functional map
# --------------------------------------------------------------------------


def is_sittable_label(label: str) -> bool:
    words = label.lower().replace("-", " ").replace("_", " ").split()
    return any(w == k or w == k + "s" for w in words for k in SITTABLE_KEYWORDS)


def seat_spot(placed: PlacedScene, oid: str) -> SeatSpot:
    pose = placed.poses[oid]
    depth = placed.scene_graph.object(oid).dims[1]
    fx, fy = axis_cos_sin(pose.yaw)
    x, y = pose.position
    return SeatSpot(oid, (x + fx * depth / 2.0, y + fy * depth / 2.0), pose.yaw)


def infer_sittable(
    placed: PlacedScene, hints: Optional[Mapping[str, bool]] = None
) -> tuple[PlacedScene, tuple[SeatSpot, ...]]:
    """Set ``sittable`` on every object and return one seat per sittable object.

    A hint for an id wins over the label table; an explicit flag already on
    the object is kept when no hint is given.
    """
    hints = dict(hints or {})
    objects: list[SceneObject] = []
    spots: list[SeatSpot] = []
    for o in placed.scene_graph.objects:
        if o.id in hints:
            flag = bool(hints[o.id])
        elif o.sittable is not None:
            flag = o.sittable
        else:
            flag = o.kind is not ObjectKind.ORNAMENT and is_sittable_label(o.label)
        objects.append(replace(o, sittable=flag))
        if flag and o.id in placed.poses:
            spots.append(seat_spot(placed, o.id))
    graph = replace(placed.scene_graph, objects=tuple(objects))
    return replace(placed, scene_graph=graph), tuple(spots)


def build_functional_map(
    placed: PlacedScene,
    regions: Mapping[tuple[int, int], CandidateRegion],
    spots: Sequence[SeatSpot],
    tau: float = RegionLossParams.tau,
) -> FunctionalMap:
    for key, r in regions.items():
        if key != r.parcel_index:
            raise ValueError(f"region keyed {key} belongs to parcel {r.parcel_index}")
        if r.loss is None or not r.loss < tau:
            raise ValueError(f"region in parcel {key} has loss {r.loss} not below {tau}")
    return FunctionalMap(dict(sorted(regions.items())), tuple(spots), tau)
