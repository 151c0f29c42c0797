"""Planar and box geometry shared by placement, visibility and camera checks.

Conventions: the floor is the x/y plane, z is up. An object's front points
along ``(cos yaw, sin yaw)``; its depth runs along the front axis and its
width across it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

TWO_PI = 2.0 * math.pi
EPS = 1e-9


def normalize_yaw(a: float) -> float:
    """Map an angle to ``[0, 2π)``."""
    if not math.isfinite(a):
        raise ValueError(f"yaw must be finite, got {a!r}")
    r = math.fmod(a, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    if r >= TWO_PI:
        r = 0.0
    return r


def angle_diff(a: float, b: float) -> float:
    """Smallest absolute difference between two angles, in ``[0, π]``."""
    d = abs(normalize_yaw(a) - normalize_yaw(b))
    return min(d, TWO_PI - d)


def bearing(src: Sequence[float], dst: Sequence[float]) -> float:
    return normalize_yaw(math.atan2(dst[1] - src[1], dst[0] - src[0]))


def axis_cos_sin(yaw: float) -> tuple[float, float]:
    """cos/sin of ``yaw`` with quarter turns snapped to exact values."""
    q = yaw / (math.pi / 2.0)
    k = round(q)
    if abs(q - k) < 1e-9:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[k % 4]
    return math.cos(yaw), math.sin(yaw)


@dataclass(frozen=True)
class Rect:
    x0: float
    y0: float
    x1: float
    y1: float

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def depth(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.depth

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)

    def contains_point(self, p: Sequence[float], eps: float = EPS) -> bool:
        return self.x0 - eps <= p[0] <= self.x1 + eps and self.y0 - eps <= p[1] <= self.y1 + eps

    def contains_rect(self, other: "Rect", eps: float = EPS) -> bool:
        return (
            other.x0 >= self.x0 - eps
            and other.y0 >= self.y0 - eps
            and other.x1 <= self.x1 + eps
            and other.y1 <= self.y1 + eps
        )

    def overlaps(self, other: "Rect", eps: float = EPS) -> bool:
        """True when the interiors intersect; shared edges do not count."""
        return (
            min(self.x1, other.x1) - max(self.x0, other.x0) > eps
            and min(self.y1, other.y1) - max(self.y0, other.y0) > eps
        )

    def distance_to_point(self, p: Sequence[float]) -> float:
        dx = max(self.x0 - p[0], 0.0, p[0] - self.x1)
        dy = max(self.y0 - p[1], 0.0, p[1] - self.y1)
        return math.sqrt(dx * dx + dy * dy)

    def distance_to_rect(self, other: "Rect") -> float:
        dx = max(other.x0 - self.x1, 0.0, self.x0 - other.x1)
        dy = max(other.y0 - self.y1, 0.0, self.y0 - other.y1)
        return math.sqrt(dx * dx + dy * dy)

    def inflate(self, margin: float) -> "Rect":
        return Rect(self.x0 - margin, self.y0 - margin, self.x1 + margin, self.y1 + margin)

    def translate(self, dx: float, dy: float) -> "Rect":
        return Rect(self.x0 + dx, self.y0 + dy, self.x1 + dx, self.y1 + dy)


def footprint_extents(dims: Sequence[float], yaw: float) -> tuple[float, float]:
    """x and y extents of the axis-aligned bound of a rotated footprint."""
    width, depth = dims[0], dims[1]
    c, s = axis_cos_sin(yaw)
    ex = abs(c) * depth + abs(s) * width
    ey = abs(s) * depth + abs(c) * width
    return ex, ey


def footprint(position: Sequence[float], yaw: float, dims: Sequence[float]) -> Rect:
    ex, ey = footprint_extents(dims, yaw)
    x, y = position[0], position[1]
    return Rect(x - ex / 2.0, y - ey / 2.0, x + ex / 2.0, y + ey / 2.0)


@dataclass(frozen=True)
class Box3:
    x0: float
    y0: float
    z0: float
    x1: float
    y1: float
    z1: float

    @classmethod
    def from_rect(cls, r: Rect, z0: float, z1: float) -> "Box3":
        return cls(r.x0, r.y0, z0, r.x1, r.y1, z1)

    def lo(self) -> tuple[float, float, float]:
        return (self.x0, self.y0, self.z0)

    def hi(self) -> tuple[float, float, float]:
        return (self.x1, self.y1, self.z1)

    def inflate(self, m: float) -> "Box3":
        return Box3(self.x0 - m, self.y0 - m, self.z0 - m, self.x1 + m, self.y1 + m, self.z1 + m)

    def contains(self, p: Sequence[float], eps: float = EPS) -> bool:
        return all(lo - eps <= v <= hi + eps for lo, v, hi in zip(self.lo(), p, self.hi()))


# Penetration length (in segment parameter units) below which a ray only grazes a box.
GRAZE = 1e-9


def segment_hits_box(p: Sequence[float], q: Sequence[float], box: Box3) -> bool:
    """Slab test for the segment ``p -> q`` against a closed box.

    A hit needs a penetration interval longer than ``GRAZE``; rays that only
    touch a face or an edge pass.
    """
    t_enter = 0.0
    t_exit = 1.0
    for lo, hi, a, b in zip(box.lo(), box.hi(), p, q):
        d = b - a
        if d == 0.0:
            if a < lo or a > hi:
                return False
            continue
        t0 = (lo - a) / d
        t1 = (hi - a) / d
        if t0 > t1:
            t0, t1 = t1, t0
        if t0 > t_enter:
            t_enter = t0
        if t1 < t_exit:
            t_exit = t1
        if t_exit - t_enter <= GRAZE:
            return False
    return t_exit - t_enter > GRAZE


def polyline_length(points: Iterable[Sequence[float]]) -> float:
    pts = list(points)
    return sum(math.dist(a, b) for a, b in zip(pts, pts[1:]))
