"""Interval arithmetic, order relations, boxes, and convex-polygon collision primitives.

Conventions used throughout:

* An interval ``[lo, hi]`` is the closed set ``{t : lo <= t <= hi}``; an
  interval vector is the axis-aligned box given by its componentwise
  intervals.
* The *southeast* order on interval pairs: ``(a.lo, a.hi) <= (b.lo, b.hi)``
  iff ``a.lo <= b.lo`` and ``b.hi <= a.hi`` componentwise, i.e. exactly when
  the box of ``b`` is contained in the box of ``a``.
* All sets are closed, so touching shapes count as intersecting.  This is
  the conservative choice for safety checking.
* Trigonometric ranges are tight (critical-point analysis), not Lipschitz
  enclosures: the returned endpoints are attained by some point of the
  input interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Interval:
    """Closed scalar interval. Units are the caller's business."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (self.lo <= self.hi):
            raise ValueError(f"empty interval: [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, t: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= t <= self.hi + tol


class IntervalVector:
    """Axis-aligned box: componentwise closed intervals.

    ``lo`` and ``hi`` are stored as read-only float arrays of equal shape
    ``(dims,)`` with ``lo <= hi`` everywhere.
    """

    __slots__ = ("lo", "hi")

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float)).copy()
        hi = np.atleast_1d(np.asarray(hi, dtype=float)).copy()
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("lo/hi must be 1-D arrays of equal length")
        if not np.all(lo <= hi):
            raise ValueError(f"empty interval vector: lo={lo}, hi={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dims(self) -> int:
        return self.lo.shape[0]

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def mid(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        return bool(np.all(self.lo - tol <= p) and np.all(p <= self.hi + tol))

    def contains_box(self, other: "IntervalVector", tol: float = 0.0) -> bool:
        return bool(
            np.all(self.lo - tol <= other.lo) and np.all(other.hi <= self.hi + tol)
        )

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, IntervalVector)
            and np.array_equal(self.lo, other.lo)
            and np.array_equal(self.hi, other.hi)
        )

    def __repr__(self) -> str:
        return f"IntervalVector(lo={self.lo.tolist()}, hi={self.hi.tolist()})"


def _crosses(lo: float, hi: float, theta: float) -> bool:
    # True iff theta + 2*pi*n lies in [lo, hi] for some integer n.
    n = math.ceil((lo - theta) / TWO_PI)
    return theta + TWO_PI * n <= hi


def interval_sin(a: Interval) -> Interval:
    """Tight range of sin over a: endpoint values plus +-1 at interior critical points."""
    s_lo, s_hi = math.sin(a.lo), math.sin(a.hi)
    lo, hi = min(s_lo, s_hi), max(s_lo, s_hi)
    if _crosses(a.lo, a.hi, 0.5 * math.pi):
        hi = 1.0
    if _crosses(a.lo, a.hi, -0.5 * math.pi):
        lo = -1.0
    return Interval(lo, hi)


def interval_cos(a: Interval) -> Interval:
    """Tight range of cos over a (maxima at 2k*pi, minima at pi + 2k*pi)."""
    c_lo, c_hi = math.cos(a.lo), math.cos(a.hi)
    lo, hi = min(c_lo, c_hi), max(c_lo, c_hi)
    if _crosses(a.lo, a.hi, 0.0):
        hi = 1.0
    if _crosses(a.lo, a.hi, math.pi):
        lo = -1.0
    return Interval(lo, hi)


def se_leq(a: IntervalVector, b: IntervalVector) -> bool:
    """Southeast order on interval pairs: true iff box(b) is contained in box(a)."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return bool(np.all(a.lo <= b.lo) and np.all(b.hi <= a.hi))


def interval_hull(a: IntervalVector, b: IntervalVector) -> IntervalVector:
    """Smallest interval vector containing both arguments."""
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return IntervalVector(np.minimum(a.lo, b.lo), np.maximum(a.hi, b.hi))


class ConvexPolygon:
    """Strictly convex polygon with counterclockwise vertices (world meters).

    ``normals`` are the outward (non-unit) edge normals; edge i runs from
    vertex i to vertex i+1.
    """

    __slots__ = ("vertices", "normals")

    def __init__(self, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or v.shape[0] < 3:
            raise ValueError("polygon needs >= 3 two-dimensional vertices")
        edges = np.roll(v, -1, axis=0) - v
        cross = edges[:, 0] * np.roll(edges, -1, axis=0)[:, 1] - edges[:, 1] * np.roll(
            edges, -1, axis=0
        )[:, 0]
        if np.any(cross <= 0.0):
            raise ValueError(
                "polygon must be strictly convex with counterclockwise vertices"
            )
        v = v.copy()
        v.setflags(write=False)
        # outward normal of a CCW edge (ex, ey) is (ey, -ex)
        n = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        n.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "normals", n)

    def contains(self, point, tol: float = 0.0) -> bool:
        p = np.asarray(point, dtype=float)
        d = np.einsum("ij,ij->i", self.normals, p[None, :] - self.vertices)
        scale = np.linalg.norm(self.normals, axis=1)
        return bool(np.all(d <= tol * scale))

    def __repr__(self) -> str:
        return f"ConvexPolygon({self.vertices.tolist()})"


def _box_center_halfwidth(box: IntervalVector):
    if box.dims != 2:
        raise ValueError("box must be 2-D")
    return box.mid, 0.5 * box.width


def box_polygon_intersect(box: IntervalVector, poly: ConvexPolygon) -> bool:
    """Separating-axis test between a closed 2-D box and a closed convex polygon.

    Axes checked: the two box axes and every polygon edge normal.  Touching
    counts as intersection (closed sets), so separation requires a strictly
    positive gap on some axis.
    """
    c, hw = _box_center_halfwidth(box)
    v = poly.vertices
    # box axes
    if v[:, 0].min() > box.hi[0] or v[:, 0].max() < box.lo[0]:
        return False
    if v[:, 1].min() > box.hi[1] or v[:, 1].max() < box.lo[1]:
        return False
    # polygon edge normals
    proj_v = v @ np.stack([poly.normals[:, 0], poly.normals[:, 1]])  # (m, m)
    proj_c = poly.normals @ c
    radius = np.abs(poly.normals[:, 0]) * hw[0] + np.abs(poly.normals[:, 1]) * hw[1]
    pv_min = proj_v.min(axis=0)
    pv_max = proj_v.max(axis=0)
    if np.any(pv_min > proj_c + radius) or np.any(pv_max < proj_c - radius):
        return False
    return True


def point_box_clearance(point, box: IntervalVector) -> float:
    p = np.asarray(point, dtype=float)
    d = np.maximum(np.maximum(box.lo - p, p - box.hi), 0.0)
    return float(math.hypot(d[0], d[1]))


def point_polygon_clearance(point, poly: ConvexPolygon) -> float:
    """Distance from a point to a convex polygon; 0 when the point is inside."""
    p = np.asarray(point, dtype=float)
    v = poly.vertices
    rel = p[None, :] - v
    if np.all(np.einsum("ij,ij->i", poly.normals, rel) <= 0.0):
        return 0.0
    best = math.inf
    m = v.shape[0]
    for i in range(m):
        a = v[i]
        b = v[(i + 1) % m]
        e = b - a
        t = float(np.dot(p - a, e) / np.dot(e, e))
        t = min(max(t, 0.0), 1.0)
        q = a + t * e
        best = min(best, math.hypot(p[0] - q[0], p[1] - q[1]))
    return best


def box_polygon_clearance(box: IntervalVector, poly: ConvexPolygon) -> float:
    """Exact distance between a closed box and a closed convex polygon (0 if they meet).

    For disjoint convex shapes the minimum distance is attained at a
    vertex-vertex or vertex-edge pair, so checking every polygon vertex
    against the box and every box corner against the polygon is exact.
    """
    if box_polygon_intersect(box, poly):
        return 0.0
    d = min(point_box_clearance(p, box) for p in poly.vertices)
    corners = (
        (box.lo[0], box.lo[1]),
        (box.hi[0], box.lo[1]),
        (box.hi[0], box.hi[1]),
        (box.lo[0], box.hi[1]),
    )
    for c in corners:
        d = min(d, point_polygon_clearance(c, poly))
    return d


def offset_polygon(poly: ConvexPolygon, r: float) -> ConvexPolygon:
    """Convex polygon whose supporting halfplanes are pushed outward by r.

    Contains the Minkowski sum of the polygon with a disk of radius r
    (over-approximating near the corners), so it is safe to use as an
    inflated obstacle. r = 0 returns an equal polygon.
    """
    if r < 0:
        raise ValueError("offset must be nonnegative")
    v = poly.vertices
    n = poly.normals
    m = v.shape[0]
    unit = n / np.linalg.norm(n, axis=1, keepdims=True)
    out = np.empty_like(v)
    for i in range(m):
        # intersection of shifted edge lines i-1 and i gives new vertex i
        j = (i - 1) % m
        a1, n1 = v[j] + r * unit[j], n[j]
        a2, n2 = v[i] + r * unit[i], n[i]
        A = np.array([[n1[0], n1[1]], [n2[0], n2[1]]])
        b = np.array([np.dot(n1, a1), np.dot(n2, a2)])
        out[i] = np.linalg.solve(A, b)
    return ConvexPolygon(out)
