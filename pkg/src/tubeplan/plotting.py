"""Self-contained SVG rendering of a simulation run.

No plotting dependency: the picture is a handful of SVG primitives written
directly.  Elements carry CSS classes (``obstacle``, ``tube-box``,
``trajectory``, ``start``, ``goal``, ``repair-marker``, ``failsafe-marker``)
so tests and downstream tooling can count and locate them by parsing the
XML rather than rasterizing it.

World coordinates are mapped with the y axis flipped, as SVG grows y
downward.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .harness import RunResult

_STYLE = """
  .obstacle { fill: #8a8a8a; stroke: #555; stroke-width: 1; }
  .tube-box { fill: #76b7ff; fill-opacity: 0.10; stroke: #3173b5;
              stroke-opacity: 0.35; stroke-width: 0.6; }
  .trajectory { fill: none; stroke: #d62728; stroke-width: 2; }
  .start { fill: #2ca02c; stroke: #145214; stroke-width: 1; }
  .goal { fill: #ffcf33; stroke: #8a6d00; stroke-width: 1; }
  .repair-marker { fill: none; stroke: #ff7f0e; stroke-width: 2; }
  .failsafe-marker { fill: #d62728; stroke: #7a1010; stroke-width: 1; }
  .annotation { font: 11px sans-serif; fill: #333; }
"""


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    """World-to-SVG coordinate mapping plus element accumulation."""

    def __init__(self, x_range, y_range, width=760.0, margin=30.0):
        self.x0, x1 = x_range
        self.y0, y1 = y_range
        span_x = max(x1 - self.x0, 1e-9)
        span_y = max(y1 - self.y0, 1e-9)
        self.scale = (width - 2 * margin) / span_x
        self.margin = margin
        self.width = width
        self.height = span_y * self.scale + 2 * margin
        self.y1 = y1
        self.parts = []

    def pt(self, x: float, y: float):
        return (
            self.margin + (x - self.x0) * self.scale,
            self.margin + (self.y1 - y) * self.scale,
        )

    def polygon(self, vertices, cls: str):
        pts = " ".join(
            f"{_fmt(px)},{_fmt(py)}" for px, py in (self.pt(x, y) for x, y in vertices)
        )
        self.parts.append(f'<polygon class="{cls}" points="{pts}"/>')

    def rect(self, lo, hi, cls: str):
        x, y = self.pt(lo[0], hi[1])
        w = (hi[0] - lo[0]) * self.scale
        h = (hi[1] - lo[1]) * self.scale
        self.parts.append(
            f'<rect class="{cls}" x="{_fmt(x)}" y="{_fmt(y)}" '
            f'width="{_fmt(w)}" height="{_fmt(h)}"/>'
        )

    def polyline(self, xy, cls: str):
        pts = " ".join(
            f"{_fmt(px)},{_fmt(py)}" for px, py in (self.pt(x, y) for x, y in xy)
        )
        self.parts.append(f'<polyline class="{cls}" points="{pts}"/>')

    def circle(self, center, r_world: float, cls: str):
        cx, cy = self.pt(*center)
        self.parts.append(
            f'<circle class="{cls}" cx="{_fmt(cx)}" cy="{_fmt(cy)}" '
            f'r="{_fmt(r_world * self.scale)}"/>'
        )

    def star(self, center, r_world: float, cls: str):
        cx, cy = self.pt(*center)
        r = r_world * self.scale
        pts = []
        for i in range(10):
            rad = r if i % 2 == 0 else 0.4 * r
            a = math.pi / 2 + i * math.pi / 5
            pts.append(f"{_fmt(cx + rad * math.cos(a))},{_fmt(cy - rad * math.sin(a))}")
        self.parts.append(f'<polygon class="{cls}" points="{" ".join(pts)}"/>')

    def text(self, pos, s: str, cls: str = "annotation"):
        px, py = self.pt(*pos)
        self.parts.append(
            f'<text class="{cls}" x="{_fmt(px)}" y="{_fmt(py)}">{s}</text>'
        )

    def render(self) -> str:
        body = "\n".join(self.parts)
        return (
            f'<svg xmlns="http://www.w3.org/2000/svg" '
            f'width="{_fmt(self.width)}" height="{_fmt(self.height)}" '
            f'viewBox="0 0 {_fmt(self.width)} {_fmt(self.height)}">\n'
            f"<style>{_STYLE}</style>\n"
            f'<rect x="0" y="0" width="{_fmt(self.width)}" '
            f'height="{_fmt(self.height)}" fill="white"/>\n'
            f"{body}\n</svg>\n"
        )


def _bounds(result: RunResult):
    xs = [result.states[:, 0].min(), result.states[:, 0].max(),
          result.scenario.goal[0], result.scenario.start.x]
    ys = [result.states[:, 1].min(), result.states[:, 1].max(),
          result.scenario.goal[1], result.scenario.start.y]
    for poly in result.scenario.obstacles:
        xs.extend([poly.vertices[:, 0].min(), poly.vertices[:, 0].max()])
        ys.extend([poly.vertices[:, 1].min(), poly.vertices[:, 1].max()])
    pad = 0.4
    return (min(xs) - pad, max(xs) + pad), (min(ys) - pad, max(ys) + pad)


def emit_plot(result: RunResult, path) -> None:
    """Render the run: world, certified tube boxes, path, and markers."""
    sc = result.scenario
    canvas = _Canvas(*_bounds(result))

    for poly in sc.obstacles:
        canvas.polygon(poly.vertices, "obstacle")

    for rec in result.cycles:
        cert = rec.accepted_certificate
        if cert is None:
            continue
        tube = cert.tube
        for j in range(len(tube)):
            box = tube.position_box(j)
            canvas.rect(box.lo, box.hi, "tube-box")

    canvas.polyline(result.states[:, :2], "trajectory")

    for rec in result.cycles:
        if rec.repair_outcome is not None:
            canvas.circle((rec.state.x, rec.state.y), 0.12, "repair-marker")
            canvas.text(
                (rec.state.x + 0.15, rec.state.y + 0.15),
                f"repair@{rec.index}:{rec.repair_outcome.result}",
            )
        if rec.action == "failsafe":
            canvas.circle((rec.state.x, rec.state.y), 0.08, "failsafe-marker")
            canvas.text(
                (rec.state.x + 0.15, rec.state.y - 0.25),
                f"failsafe@{rec.index}",
            )

    canvas.circle((sc.start.x, sc.start.y), sc.robot_radius, "start")
    canvas.star(sc.goal, max(sc.goal_radius, 0.15), "goal")
    canvas.text(
        (canvas.x0 + 0.1, canvas.y1 - 0.05),
        f"{sc.name} [{sc.mode}] seed={sc.seed}: {result.outcome}",
    )

    Path(path).write_text(canvas.render())
