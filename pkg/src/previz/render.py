"""Top-view SVG drawings of the room.

Layers: ``detection`` draws labelled object boxes with a facing arrow,
``functional`` draws performing regions as squares and seats as circles,
and ``shot`` draws objects in outline plus camera positions, look vectors
and frustum wedges. Every layer starts from a metre grid drawn with lines,
so rectangle counts reflect content only.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import Optional, Sequence

from .model import PlacedScene, ShotPlan
from .regions import FunctionalMap

SCALE = 100.0  # pixels per metre
MARGIN = 20.0
ASPECT = 16.0 / 9.0  # wedge width follows the default frame aspect
LAYERS = ("detection", "functional", "shot")
_SVG_NS = "http://www.w3.org/2000/svg"


class UnknownLayer(ValueError):
    pass


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class _Canvas:
    def __init__(self, placed: PlacedScene) -> None:
        self.b = placed.bounds
        self.w = self.b.width * SCALE + 2 * MARGIN
        self.h = self.b.depth * SCALE + 2 * MARGIN
        self.root = ET.Element(
            "svg",
            {
                "xmlns": _SVG_NS,
                "width": _f(self.w),
                "height": _f(self.h),
                "viewBox": f"0 0 {_f(self.w)} {_f(self.h)}",
            },
        )

    def x(self, v: float) -> float:
        return MARGIN + (v - self.b.x_min) * SCALE

    def y(self, v: float) -> float:
        # SVG y grows downwards
        return MARGIN + (self.b.y_max - v) * SCALE

    def group(self, name: str) -> ET.Element:
        return ET.SubElement(self.root, "g", {"id": name})

    def line(self, parent: ET.Element, p, q, **attrs: str) -> ET.Element:
        a = {"x1": _f(self.x(p[0])), "y1": _f(self.y(p[1])), "x2": _f(self.x(q[0])), "y2": _f(self.y(q[1]))}
        a.update(attrs)
        return ET.SubElement(parent, "line", a)

    def text(self, parent: ET.Element, p, s: str, **attrs: str) -> ET.Element:
        a = {"x": _f(self.x(p[0])), "y": _f(self.y(p[1])), "font-size": "10", "text-anchor": "middle"}
        a.update(attrs)
        el = ET.SubElement(parent, "text", a)
        el.text = s
        return el


def _grid(c: _Canvas) -> None:
    g = c.group("grid")
    b = c.b
    style = {"stroke": "#cccccc", "stroke-width": "0.5"}
    x = math.ceil(b.x_min)
    while x <= b.x_max + 1e-9:
        c.line(g, (x, b.y_min), (x, b.y_max), **style)
        x += 1
    y = math.ceil(b.y_min)
    while y <= b.y_max + 1e-9:
        c.line(g, (b.x_min, y), (b.x_max, y), **style)
        y += 1
    border = {"stroke": "#000000", "stroke-width": "1.5"}
    corners = [(b.x_min, b.y_min), (b.x_max, b.y_min), (b.x_max, b.y_max), (b.x_min, b.y_max)]
    for p, q in zip(corners, corners[1:] + corners[:1]):
        c.line(g, p, q, **border)


def _objects(c: _Canvas, placed: PlacedScene, outline_only: bool = False) -> None:
    g = c.group("objects")
    for oid in placed.placed_ids():
        r = placed.footprint(oid)
        if outline_only:
            corners = ((r.x0, r.y0), (r.x1, r.y0), (r.x1, r.y1), (r.x0, r.y1))
            ET.SubElement(g, "polygon", {
                "points": " ".join(f"{_f(c.x(px))},{_f(c.y(py))}" for px, py in corners),
                "fill": "none", "stroke": "#8899aa", "stroke-width": "1",
            })
            continue
        ET.SubElement(g, "rect", {
            "x": _f(c.x(r.x0)), "y": _f(c.y(r.y1)), "width": _f(r.width * SCALE), "height": _f(r.depth * SCALE),
            "fill": "#d9e4f0", "stroke": "#34506b", "stroke-width": "1", "data-id": oid,
        })
        label = placed.scene_graph.object(oid).label
        c.text(g, r.center, label)
        yaw = placed.poses[oid].yaw
        cx, cy = r.center
        reach = min(r.width, r.depth) / 2.0
        tip = (cx + math.cos(yaw) * reach, cy + math.sin(yaw) * reach)
        c.line(g, (cx, cy), tip, stroke="#c0392b", **{"stroke-width": "1.5", "class": "yaw"})


def _functional(c: _Canvas, fm: Optional[FunctionalMap]) -> None:
    if fm is None:
        return
    g = c.group("functional")
    for reg in fm.region_list():
        r = reg.footprint
        ET.SubElement(g, "rect", {
            "x": _f(c.x(r.x0)), "y": _f(c.y(r.y1)), "width": _f(r.width * SCALE), "height": _f(r.depth * SCALE),
            "fill": "#2ecc71", "fill-opacity": "0.35", "stroke": "#1e8449", "stroke-width": "1",
            "data-parcel": f"{reg.parcel_index[0]},{reg.parcel_index[1]}",
        })
    for seat in fm.sittable_spots:
        ET.SubElement(g, "circle", {
            "cx": _f(c.x(seat.point[0])), "cy": _f(c.y(seat.point[1])), "r": "6",
            "fill": "#f39c12", "stroke": "#9c640c", "stroke-width": "1", "data-id": seat.object_id,
        })


def _shots(c: _Canvas, shots: Sequence[ShotPlan]) -> None:
    g = c.group("shots")
    for plan in shots:
        s = plan.track.samples[0]
        pos, look = s.position, s.look_at
        heading = math.atan2(look[1] - pos[1], look[0] - pos[0])
        half = math.atan(ASPECT * math.tan(s.vertical_fov / 2.0))
        reach = max(0.5, math.dist(pos[:2], look[:2]))
        left = (pos[0] + reach * math.cos(heading + half), pos[1] + reach * math.sin(heading + half))
        right = (pos[0] + reach * math.cos(heading - half), pos[1] + reach * math.sin(heading - half))
        pts = [pos[:2], left, right]
        ET.SubElement(g, "polygon", {
            "points": " ".join(f"{_f(c.x(p[0]))},{_f(c.y(p[1]))}" for p in pts),
            "fill": "#8e44ad", "fill-opacity": "0.15", "stroke": "#8e44ad", "stroke-width": "0.5",
        })
        c.line(g, pos[:2], look[:2], stroke="#8e44ad", **{"stroke-width": "1"})
        path = " ".join(f"{_f(c.x(x.position[0]))},{_f(c.y(x.position[1]))}" for x in plan.track.samples)
        ET.SubElement(g, "polyline", {"points": path, "fill": "none", "stroke": "#5b2c6f", "stroke-width": "1"})
        ET.SubElement(g, "circle", {
            "cx": _f(c.x(pos[0])), "cy": _f(c.y(pos[1])), "r": "4", "fill": "#5b2c6f",
            "data-clip": str(plan.clip),
        })
        c.text(g, (pos[0], pos[1] - 0.15), f"{plan.clip} {plan.template_type}", fill="#5b2c6f")


def render_svg(
    placed: PlacedScene,
    layer: str,
    fm: Optional[FunctionalMap] = None,
    shots: Sequence[ShotPlan] = (),
) -> str:
    if layer not in LAYERS:
        raise UnknownLayer(f"unknown layer {layer!r}; choose from {', '.join(LAYERS)}")
    c = _Canvas(placed)
    _grid(c)
    if layer == "detection":
        _objects(c, placed)
    elif layer == "functional":
        _functional(c, fm)
    else:
        _objects(c, placed, outline_only=True)
        _shots(c, shots)
    ET.indent(c.root)
    return ET.tostring(c.root, encoding="unicode") + "\n"
