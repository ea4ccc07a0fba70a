"""SVG drawings of planar scenes, roadmaps and planned paths.

Obstacles are drawn at their nominal positions with a translucent halo
that extends two position standard deviations beyond the shape.  Disc
robots are traced through the workspace; arm paths show the link chain at
every waypoint plus the trace of the end effector.  Each planned path is a
single ``<path>`` element (one subpath per disc robot).
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Iterable, Optional, Sequence

import numpy as np

from .scenario import DiscSet, Scenario, workspace_box

HALO_SIGMAS = 2.0
PATH_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")


def _fmt(v: float) -> str:
    return f"{v:.4f}".rstrip("0").rstrip(".")


class _Canvas:
    """Maps workspace coordinates to SVG pixels (y up)."""

    def __init__(self, box, size):
        self.x0, self.y0, self.x1, self.y1 = box
        self.scale = size / max(self.x1 - self.x0, self.y1 - self.y0)
        self.width = (self.x1 - self.x0) * self.scale
        self.height = (self.y1 - self.y0) * self.scale

    def xy(self, p):
        return (p[0] - self.x0) * self.scale, (self.y1 - p[1]) * self.scale

    def length(self, v):
        return v * self.scale


def _points(canvas, pts) -> str:
    return " ".join(",".join(map(_fmt, canvas.xy(p))) for p in pts)


def _obstacle(parent, canvas, o, pad, style):
    cx, cy = canvas.xy(o.position)
    if o.shape == "disc":
        ET.SubElement(parent, "circle", cx=_fmt(cx), cy=_fmt(cy), r=_fmt(canvas.length(o.radius + pad)), **style)
    else:
        w = canvas.length(o.width + 2 * pad)
        h = canvas.length(o.height + 2 * pad)
        ET.SubElement(parent, "rect", x=_fmt(cx - w / 2), y=_fmt(cy - h / 2), width=_fmt(w), height=_fmt(h), **style)


def _trace_points(scenario, configs) -> list:
    """Workspace polylines for a configuration sequence: one per disc, or the arm tip."""
    configs = np.asarray(configs, dtype=float)
    if isinstance(scenario.robot, DiscSet):
        centers = configs.reshape(len(configs), -1, 2)
        return [centers[:, r] for r in range(centers.shape[1])]
    return [scenario.robot.joints(configs)[:, -1]]


def render_svg(scenario: Scenario, roadmap=None, paths: Sequence = (), size: int = 600,
               path_configs: Optional[Iterable] = None) -> str:
    """Return an SVG document.

    ``paths`` holds :class:`~robustplan.pathing.PlannedPath` objects whose
    node ids index ``roadmap.milestones``; ``path_configs`` may give raw
    configuration sequences instead.
    """
    canvas = _Canvas(workspace_box(scenario), size)
    svg = ET.Element("svg", xmlns="http://www.w3.org/2000/svg", width=_fmt(canvas.width),
                     height=_fmt(canvas.height), viewBox=f"0 0 {_fmt(canvas.width)} {_fmt(canvas.height)}")
    ET.SubElement(svg, "rect", x="0", y="0", width=_fmt(canvas.width), height=_fmt(canvas.height),
                  fill="white", stroke="black")

    layer = ET.SubElement(svg, "g", id="obstacles")
    for o in scenario.obstacles:
        spread = HALO_SIGMAS * max(o.std)
        if spread > 0:
            _obstacle(layer, canvas, o, spread, {"fill": "#888888", "fill-opacity": "0.25"})
        _obstacle(layer, canvas, o, 0.0, {"fill": "#444444"})

    configs = []
    if roadmap is not None:
        ms = roadmap.milestones
        ok = np.all(np.isfinite(ms), axis=1)
        layer = ET.SubElement(svg, "g", id="milestones", fill="#999999")
        for pts in _trace_points(scenario, ms[ok]):
            for p in pts:
                cx, cy = canvas.xy(p)
                ET.SubElement(layer, "circle", cx=_fmt(cx), cy=_fmt(cy), r="1.5")
        configs = [roadmap.milestones[list(p.node_ids)] for p in paths]
    if path_configs is not None:
        configs += [np.asarray(c, dtype=float) for c in path_configs]

    layer = ET.SubElement(svg, "g", id="paths", fill="none")
    for n, seq in enumerate(configs):
        color = PATH_COLORS[n % len(PATH_COLORS)]
        if not isinstance(scenario.robot, DiscSet):
            for joints in scenario.robot.joints(seq):
                ET.SubElement(layer, "polyline", points=_points(canvas, joints), stroke=color,
                              **{"stroke-opacity": "0.35", "stroke-width": "1"})
        d = " ".join("M " + _points(canvas, pts[:1]) + " L " + _points(canvas, pts)
                     for pts in _trace_points(scenario, seq))
        ET.SubElement(layer, "path", d=d, stroke=color, **{"stroke-width": "2"})

    for name, x in (("start", scenario.start), ("goal", scenario.goal)):
        for p in _trace_points(scenario, x[None, :]):
            cx, cy = canvas.xy(p[0])
            ET.SubElement(svg, "circle", cx=_fmt(cx), cy=_fmt(cy), r="4",
                          fill="#2ca02c" if name == "start" else "#d62728", **{"class": name})
    return ET.tostring(svg, encoding="unicode") + "\n"
