"""Shared helpers for the test suite: random geometry generators and
brute-force oracles that are deliberately independent of the library's
own algorithms."""

import numpy as np

from tubeplan.geometry import ConvexPolygon, IntervalVector


def convex_hull(points):
    """Andrew's monotone chain. Returns CCW hull vertices without the
    closing duplicate. Collinear points are dropped."""
    pts = sorted(set(map(tuple, points)))
    if len(pts) < 3:
        return np.asarray(pts, dtype=float)

    def half(seq):
        out = []
        for p in seq:
            while len(out) >= 2:
                o, a = out[-2], out[-1]
                cross = (a[0] - o[0]) * (p[1] - o[1]) - (a[1] - o[1]) * (p[0] - o[0])
                if cross <= 0:
                    out.pop()
                else:
                    break
            out.append(p)
        return out

    lower = half(pts)
    upper = half(reversed(pts))
    return np.asarray(lower[:-1] + upper[:-1], dtype=float)


def random_convex_polygon(rng, center=(0.0, 0.0), scale=1.0, n_points=8):
    """Hull of random points; retries until at least 3 hull vertices."""
    while True:
        pts = center + scale * rng.uniform(-1.0, 1.0, size=(n_points, 2))
        hull = convex_hull(pts)
        if hull.shape[0] >= 3:
            return ConvexPolygon(hull)


def random_box(rng, center=(0.0, 0.0), scale=1.0):
    c = np.asarray(center, dtype=float) + scale * rng.uniform(-1.0, 1.0, size=2)
    hw = scale * rng.uniform(0.05, 1.0, size=2)
    return IntervalVector(c - hw, c + hw)


def point_in_polygon(points, poly):
    """Vectorized half-plane membership for closed convex polygons.

    points: (n, 2). Returns boolean (n,).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.einsum("nmj,mj->nm", pts[:, None, :] - poly.vertices[None, :, :], poly.normals)
    return np.all(d <= 0.0, axis=1)


def _points_to_polygon_distance(pts, poly):
    """Exact distance from each point to the closed polygon (0 inside)."""
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    rel = pts[:, None, :] - v[None, :, :]
    t = np.clip(np.einsum("nmj,mj->nm", rel, e) / np.einsum("mj,mj->m", e, e), 0.0, 1.0)
    closest = v[None, :, :] + t[:, :, None] * e[None, :, :]
    d = np.linalg.norm(pts[:, None, :] - closest, axis=2).min(axis=1)
    d[point_in_polygon(pts, poly)] = 0.0
    return d


def _points_to_box_distance(pts, box):
    gap = np.maximum(np.maximum(box.lo - pts, pts - box.hi), 0.0)
    return np.linalg.norm(gap, axis=1)


def _polygon_boundary_points(poly, n):
    """n points spread along the boundary by arclength, plus the vertices."""
    v = poly.vertices
    e = np.roll(v, -1, axis=0) - v
    lengths = np.linalg.norm(e, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = np.linspace(0.0, cum[-1], n, endpoint=False)
    seg = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(v) - 1)
    frac = (s - cum[seg]) / lengths[seg]
    return np.vstack([v[seg] + frac[:, None] * e[seg], v])


def _box_boundary_points(box, n):
    corners = np.array(
        [
            [box.lo[0], box.lo[1]],
            [box.hi[0], box.lo[1]],
            [box.hi[0], box.hi[1]],
            [box.lo[0], box.hi[1]],
        ]
    )
    e = np.roll(corners, -1, axis=0) - corners
    lengths = np.linalg.norm(e, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(lengths)])
    s = np.linspace(0.0, cum[-1], n, endpoint=False)
    seg = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, 3)
    frac = (s - cum[seg]) / np.where(lengths[seg] > 0, lengths[seg], 1.0)
    return np.vstack([corners[seg] + frac[:, None] * e[seg], corners])


def sampled_min_distance(box, poly, n=10_000, rng=None):
    """Brute-force separation oracle, independent of the SAT code path.

    Samples each shape's boundary densely (the minimum distance between
    disjoint convex sets is attained on the boundaries) plus random
    interior points, and measures exact point-to-set distances in both
    directions. Returns (min_distance_estimate, overlap_detected).

    For disjoint shapes the estimate upper-bounds the true distance by
    at most the boundary sample spacing; for overlapping shapes either a
    sample lands inside the other shape (overlap_detected) or the overlap
    sliver is thinner than the spacing, in which case the estimate drops
    below the spacing and the pair reads as grazing.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    n_b = max(n // 2, 64)
    poly_pts = _polygon_boundary_points(poly, n_b)
    box_pts = _box_boundary_points(box, n_b)
    interior = rng.uniform(box.lo, box.hi, size=(max(n // 4, 32), 2))

    d_poly_side = _points_to_box_distance(poly_pts, box)
    d_box_side = _points_to_polygon_distance(np.vstack([box_pts, interior]), poly)
    if np.any(d_poly_side == 0.0) or np.any(d_box_side == 0.0):
        return 0.0, True
    return float(min(d_poly_side.min(), d_box_side.min())), False


def make_scenario(**overrides):
    """Small, fast harness scenario: coarse tables, short horizon.

    Defaults give an empty 4 m dash that finishes in a handful of cycles
    and builds its offline tables in well under a second.
    """
    from tubeplan.dynamics import UnicycleState, VehicleLimits
    from tubeplan.harness import Scenario

    base = dict(
        name="unit",
        start=UnicycleState(0.0, 0.0, 0.0, 0.0),
        goal=(4.0, 0.0),
        goal_radius=0.3,
        limits=VehicleLimits(v_max=1.2, t_stop=0.5),
        max_cycles=10,
        n_k=15,
        dt_frs=0.1,
        dt_v=0.02,
        dt_sim=0.01,
        tracking_samples=30,
    )
    base.update(overrides)
    return Scenario(**base)
