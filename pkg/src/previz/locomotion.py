"""Grid path planning for character movement.

8-connected A* over the floor grid. Diagonal steps cost sqrt(2) cells and may
not cut past an occupied corner. Obstacles are inflated by the character
radius, except close to the two endpoints so that characters parked near
furniture can still leave. The cell path is then shortened by dropping
waypoints that have a clear line of sight.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .model import OccupancyGrid

SQRT2 = math.sqrt(2.0)
CHARACTER_RADIUS = 0.3

_MOVES = (
    (-1, 0, False),
    (1, 0, False),
    (0, -1, False),
    (0, 1, False),
    (-1, -1, True),
    (-1, 1, True),
    (1, -1, True),
    (1, 1, True),
)


class NoPath(RuntimeError):
    pass


@dataclass(frozen=True)
class Route:
    points: tuple[tuple[float, float], ...]
    straight_moves: int
    diagonal_moves: int
    cell_size: float

    @property
    def cost(self) -> float:
        """Grid path length in metres."""
        return self.cell_size * (self.straight_moves + self.diagonal_moves * SQRT2)

    @property
    def length(self) -> float:
        pts = self.points
        return sum(math.dist(a, b) for a, b in zip(pts, pts[1:]))


def inflate(cells: np.ndarray, cell_size: float, radius: float) -> np.ndarray:
    """Occupied cells plus every free cell whose centre is within ``radius`` of an occupied centre."""
    if radius <= 0 or not cells.any():
        return cells.copy()
    dist = ndimage.distance_transform_edt(~cells)
    return cells | (dist <= radius / cell_size + 1e-9)


def _endpoint_cell(grid: OccupancyGrid, p: Sequence[float]) -> tuple[int, int]:
    ox, oy = grid.origin
    cs = grid.cell_size
    r = math.floor(round((p[1] - oy) / cs, 9))
    c = math.floor(round((p[0] - ox) / cs, 9))
    if not grid.in_grid(r, c):
        raise NoPath(f"point {tuple(p)} lies outside the grid")
    return r, c


def _free_near(cells: np.ndarray, rc: tuple[int, int]) -> Optional[tuple[int, int]]:
    r, c = rc
    if not cells[r, c]:
        return rc
    for dr, dc, _ in _MOVES:
        rr, cc = r + dr, c + dc
        if 0 <= rr < cells.shape[0] and 0 <= cc < cells.shape[1] and not cells[rr, cc]:
            return (rr, cc)
    return None


def passable_mask(
    grid: OccupancyGrid,
    radius: float,
    endpoints: Sequence[tuple[int, int]] = (),
) -> np.ndarray:
    """Traversable cells: outside the inflated obstacles, or raw-free near an endpoint."""
    raw = grid.cells
    blocked = inflate(raw, grid.cell_size, radius)
    if endpoints and radius > 0:
        reach = int(math.ceil(radius / grid.cell_size)) + 1
        rows, cols = np.indices(raw.shape)
        for r, c in endpoints:
            near = (np.abs(rows - r) <= reach) & (np.abs(cols - c) <= reach)
            blocked = np.where(near, raw, blocked)
    return ~blocked


def astar(passable: np.ndarray, start: tuple[int, int], goal: tuple[int, int]) -> list[tuple[int, int]]:
    """Shortest 8-connected cell path, no corner cutting."""
    if not (passable[start] and passable[goal]):
        raise NoPath("start or goal cell is blocked")
    R, C = passable.shape
    gr, gc = goal

    def h(r: int, c: int) -> float:
        dr, dc = abs(r - gr), abs(c - gc)
        return (max(dr, dc) - min(dr, dc)) + SQRT2 * min(dr, dc)

    g = {start: 0.0}
    parent: dict[tuple[int, int], tuple[int, int]] = {}
    heap = [(h(*start), 0.0, start)]
    closed: set[tuple[int, int]] = set()
    while heap:
        _, cost, node = heapq.heappop(heap)
        if node in closed:
            continue
        if node == goal:
            path = [node]
            while node in parent:
                node = parent[node]
                path.append(node)
            return path[::-1]
        closed.add(node)
        r, c = node
        for dr, dc, diag in _MOVES:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < R and 0 <= cc < C) or not passable[rr, cc]:
                continue
            if diag and not (passable[r + dr, c] and passable[r, c + dc]):
                continue
            nxt = (rr, cc)
            if nxt in closed:
                continue
            ng = cost + (SQRT2 if diag else 1.0)
            if ng < g.get(nxt, math.inf):
                g[nxt] = ng
                parent[nxt] = node
                heapq.heappush(heap, (ng + h(rr, cc), ng, nxt))
    raise NoPath("goal unreachable")


def cells_on_segment(grid: OccupancyGrid, p: Sequence[float], q: Sequence[float]) -> list[tuple[int, int]]:
    """Cells crossed by a segment (Amanatides-Woo); exact corner crossings include both side cells."""
    ox, oy = grid.origin
    cs = grid.cell_size
    x0, y0 = (p[0] - ox) / cs, (p[1] - oy) / cs
    x1, y1 = (q[0] - ox) / cs, (q[1] - oy) / cs
    c, r = math.floor(x0), math.floor(y0)
    c_end, r_end = math.floor(x1), math.floor(y1)
    dx, dy = x1 - x0, y1 - y0
    step_c = 1 if dx > 0 else -1
    step_r = 1 if dy > 0 else -1
    t_dx = abs(1.0 / dx) if dx != 0 else math.inf
    t_dy = abs(1.0 / dy) if dy != 0 else math.inf
    t_x = ((c + 1 - x0) if dx > 0 else (x0 - c)) * t_dx if dx != 0 else math.inf
    t_y = ((r + 1 - y0) if dy > 0 else (y0 - r)) * t_dy if dy != 0 else math.inf
    out = [(r, c)]
    limit = abs(c_end - c) + abs(r_end - r) + 2
    for _ in range(limit):
        if (r, c) == (r_end, c_end):
            break
        if abs(t_x - t_y) < 1e-12:
            if t_x > 1.0:
                break
            out.append((r, c + step_c))
            out.append((r + step_r, c))
            c += step_c
            r += step_r
            t_x += t_dx
            t_y += t_dy
        elif t_x < t_y:
            if t_x > 1.0:
                break
            c += step_c
            t_x += t_dx
        else:
            if t_y > 1.0:
                break
            r += step_r
            t_y += t_dy
        out.append((r, c))
    return out


def segment_clear(grid: OccupancyGrid, passable: np.ndarray, p: Sequence[float], q: Sequence[float]) -> bool:
    for r, c in cells_on_segment(grid, p, q):
        if not (0 <= r < passable.shape[0] and 0 <= c < passable.shape[1]) or not passable[r, c]:
            return False
    return True


def simplify(grid: OccupancyGrid, passable: np.ndarray, points: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Greedy line-of-sight shortcutting: from each kept point jump to the farthest visible one."""
    if len(points) <= 2:
        return list(points)
    out = [points[0]]
    i = 0
    while i < len(points) - 1:
        j = len(points) - 1
        while j > i + 1 and not segment_clear(grid, passable, points[i], points[j]):
            j -= 1
        out.append(points[j])
        i = j
    return out


def plan_locomotion(
    start: Sequence[float],
    end: Sequence[float],
    grid: OccupancyGrid,
    radius: float = CHARACTER_RADIUS,
) -> Route:
    """Polyline from ``start`` to ``end`` through free floor cells."""
    start = (float(start[0]), float(start[1]))
    end = (float(end[0]), float(end[1]))
    cs = grid.cell_size
    if start == end:
        return Route((start,), 0, 0, cs)
    s_raw = _endpoint_cell(grid, start)
    e_raw = _endpoint_cell(grid, end)
    s_cell = _free_near(grid.cells, s_raw)
    e_cell = _free_near(grid.cells, e_raw)
    if s_cell is None or e_cell is None:
        raise NoPath("an endpoint is enclosed by obstacles")
    passable = passable_mask(grid, radius, (s_cell, e_cell))
    cells = astar(passable, s_cell, e_cell)
    straight = diagonal = 0
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        if r0 != r1 and c0 != c1:
            diagonal += 1
        else:
            straight += 1
    centers = [grid.cell_center(r, c) for r, c in cells]
    pts = [start] + centers[1:-1] + [end] if len(centers) > 1 else [start, end]
    # the endpoints themselves may sit in a cell that was swapped for a free neighbour
    simplified = simplify(grid, passable | _endpoint_mask(passable.shape, [s_raw, e_raw]), pts)
    return Route(tuple(simplified), straight, diagonal, cs)


def _endpoint_mask(shape: tuple[int, int], cells: list[tuple[int, int]]) -> np.ndarray:
    m = np.zeros(shape, dtype=bool)
    m[cells[0]] = True
    m[cells[-1]] = True
    return m
