"""Backend equivalence and correctness for the numeric kernels.

Each test exercises both implementations (compiled and interpreted) and,
where a slower reference exists in the geometry layer, checks against it.
"""

import math

import numpy as np
import pytest

from tubeplan import geometry
from tubeplan.kernels import _numpy_impl as knp
from tubeplan.kernels import pack_polygons

try:
    from tubeplan.kernels import _numba_impl as knb

    BACKENDS = [("numpy", knp), ("numba", knb)]
except ImportError:  # pragma: no cover - numba should be present
    knb = None
    BACKENDS = [("numpy", knp)]

from util import random_box, random_convex_polygon

LIM = dict(v_cruise=1.6, w_cruise=0.7, t_plan=1.5, t_stop=1.0, k_a=4.0, a_max=2.0)
LIM_TUPLE = (1.6, 0.7, 1.5, 1.0, 4.0, 2.0)


@pytest.fixture(params=BACKENDS, ids=[b[0] for b in BACKENDS])
def k(request):
    return request.param[1]


def _random_polys(rng, n=3):
    polys = [
        random_convex_polygon(rng, center=rng.uniform(-3, 3, size=2), scale=1.0)
        for _ in range(n)
    ]
    return polys, pack_polygons(polys)


# ------------------------------------------------------------------- trig


def test_trig_ranges_match_geometry(k):
    rng = np.random.default_rng(42)
    for _ in range(400):
        lo = rng.uniform(-15, 15)
        hi = lo + rng.uniform(0, 10)
        s = geometry.interval_sin(geometry.Interval(lo, hi))
        c = geometry.interval_cos(geometry.Interval(lo, hi))
        assert k.sin_range(lo, hi) == (s.lo, s.hi)
        assert k.cos_range(lo, hi) == (c.lo, c.hi)


# ---------------------------------------------------------------- commands


def test_commands_profile_shape(k):
    v, w = k.commands_at(0.0, *LIM_TUPLE[:4])
    assert (v, w) == (1.6, 0.7)
    v, w = k.commands_at(1.5, *LIM_TUPLE[:4])
    assert (v, w) == (1.6, 0.7)
    v, w = k.commands_at(2.0, *LIM_TUPLE[:4])
    assert v == pytest.approx(0.8) and w == pytest.approx(0.35)
    v, w = k.commands_at(2.5, *LIM_TUPLE[:4])
    assert v == 0.0 and w == 0.0
    v, w = k.commands_at(99.0, *LIM_TUPLE[:4])
    assert v == 0.0 and w == 0.0


# --------------------------------------------------------------- integrators


def test_rk4_exact_for_constant_speed(k):
    # at tracking equilibrium with no turn the derivative is constant, so
    # one RK4 step advances x by exactly v*dt
    x, y, h, v = k.rk4_step(0.0, 0.0, 0.0, 1.6, 0.0, 0.01, 1.6, 0.0, 1.5, 1.0, 4.0, 2.0, 0.0, 0.0)
    assert x == pytest.approx(0.016, abs=1e-15)
    assert y == 0.0 and h == 0.0 and v == 1.6


def test_rollout_matches_stepping(k):
    rng = np.random.default_rng(0)
    w = rng.uniform(-0.1, 0.1, size=(50, 2))
    state0 = np.array([0.3, -0.2, 0.5, 1.0])
    tr = k.rollout(state0, 0.0, 0.01, 50, *LIM_TUPLE, w)
    x, y, h, v = state0
    for i in range(50):
        x, y, h, v = k.rk4_step(x, y, h, v, 0.0 + i * 0.01, 0.01, *LIM_TUPLE, w[i, 0], w[i, 1])
    assert tr[-1, 0] == x and tr[-1, 1] == y and tr[-1, 2] == h and tr[-1, 3] == v


def test_cross_backend_rollout_agreement():
    if knb is None:
        pytest.skip("numba backend unavailable")
    rng = np.random.default_rng(5)
    w = rng.uniform(-0.2, 0.2, size=(250, 2))
    state0 = np.array([0.0, 0.0, -1.2, 0.4])
    a = knp.rollout(state0, 0.0, 0.01, 250, *LIM_TUPLE, w)
    b = knb.rollout(state0, 0.0, 0.01, 250, *LIM_TUPLE, w)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


# ----------------------------------------------------------- embedding tube


def test_emb_deriv_degenerate_equals_field(k):
    rng = np.random.default_rng(9)
    for _ in range(200):
        h = rng.uniform(-7, 7)
        v = rng.uniform(-0.5, 2.5)
        t = rng.uniform(0, 2.5)
        f = k.field(h, v, t, *LIM_TUPLE, 0.0, 0.0)
        e = k.emb_deriv(0.0, 0.0, h, v, 0.0, 0.0, h, v, t, *LIM_TUPLE, 0.0, 0.0, 0.0, 0.0)
        assert e[:4] == f
        assert e[4:] == f


def test_tube_degenerate_matches_rollout_bitwise(k):
    state0 = np.array([0.1, -0.4, 0.8, 0.9])
    n = 250
    w = np.zeros((n, 2))
    pad = np.zeros(4)
    tr = k.rollout(state0, 0.0, 0.01, n, *LIM_TUPLE, w)
    lo, hi, fail = k.tube_rk4(state0, state0.copy(), 0.0, 0.01, n, *LIM_TUPLE, w, w, pad)
    assert fail == -1
    assert np.array_equal(lo, tr)
    assert np.array_equal(hi, tr)


def test_tube_contains_samples(k):
    rng = np.random.default_rng(77)
    eps = np.array([0.02, 0.02, 0.01, 0.02])
    x_hat = np.array([0.0, 0.0, 0.3, 1.0])
    n = 250
    w_lo_step = np.full((n, 2), -0.1)
    w_hi_step = np.full((n, 2), 0.1)
    lo, hi, fail = k.tube_rk4(
        x_hat - eps, x_hat + eps, 0.0, 0.01, n, *LIM_TUPLE, w_lo_step, w_hi_step, np.zeros(4)
    )
    assert fail == -1
    B = 300
    x0 = rng.uniform(x_hat - eps, x_hat + eps, size=(B, 4))
    w = rng.uniform(-0.1, 0.1, size=(B, n, 2))
    worst = k.mc_max_violation(x0, 0.0, 0.01, n, *LIM_TUPLE, w, lo, hi)
    assert worst <= 1e-9


def test_cross_backend_tube_agreement():
    if knb is None:
        pytest.skip("numba backend unavailable")
    eps = np.array([0.05, 0.05, 0.02, 0.04])
    x_hat = np.array([0.2, -0.1, 1.1, 0.7])
    n = 250
    w_lo = np.tile([-0.05, -0.2], (n, 1))
    w_hi = np.tile([0.05, 0.01], (n, 1))
    args = (x_hat - eps, x_hat + eps, 0.0, 0.01, n, *LIM_TUPLE, w_lo, w_hi, np.zeros(4))
    lo_a, hi_a, fail_a = knp.tube_rk4(*args)
    lo_b, hi_b, fail_b = knb.tube_rk4(*args)
    assert fail_a == fail_b == -1
    np.testing.assert_allclose(lo_a, lo_b, rtol=0, atol=1e-12)
    np.testing.assert_allclose(hi_a, hi_b, rtol=0, atol=1e-12)


def test_tube_rk4_reports_order_violation(k):
    # inverted disturbance bounds force lower > upper within a step
    n = 5
    w_lo = np.full((n, 2), 5.0)
    w_hi = np.full((n, 2), -5.0)
    state0 = np.array([0.0, 0.0, 0.0, 1.0])
    lo, hi, fail = k.tube_rk4(
        state0, state0.copy(), 0.0, 0.01, n, *LIM_TUPLE, w_lo, w_hi, np.zeros(4)
    )
    assert fail == 1


# ------------------------------------------------------- tracking deviation


def test_tracking_dev_zero_when_started_at_speed(k):
    # exact tracking: v0 == commanded cruise speed and the reference follows
    # the same commands, so deviation stays at integrator-error level
    from tubeplan.dynamics import plan_positions

    v0 = np.array([1.6])
    vc = np.array([1.6])
    wc = np.array([0.7])
    n_ref = 11
    stride = 5
    dt = 0.005
    ts = np.arange(n_ref) * (stride * dt)
    ref = plan_positions(vc, wc, ts, 1.5, 1.0)
    dev = k.tracking_dev_batch(v0, vc, wc, dt, stride, n_ref, 1.5, 1.0, 4.0, 2.0, ref)
    assert dev.max() < 1e-6


def test_cross_backend_tracking_agreement():
    if knb is None:
        pytest.skip("numba backend unavailable")
    from tubeplan.dynamics import plan_positions

    rng = np.random.default_rng(3)
    B = 16
    vc = rng.uniform(0.0, 2.0, B)
    wc = rng.uniform(-1.0, 1.0, B)
    v0 = np.maximum(0.0, vc + rng.uniform(-1.0, 0.5, B))
    n_ref = 101
    stride = 5
    dt = 0.005
    ts = np.arange(n_ref) * (stride * dt)
    ref = plan_positions(vc, wc, ts, 1.5, 1.0)
    a = knp.tracking_dev_batch(v0, vc, wc, dt, stride, n_ref, 1.5, 1.0, 4.0, 2.0, ref)
    b = knb.tracking_dev_batch(v0, vc, wc, dt, stride, n_ref, 1.5, 1.0, 4.0, 2.0, ref)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-11)


# --------------------------------------------------------- collision kernels


def test_sat_and_dist_match_geometry(k):
    rng = np.random.default_rng(123)
    for _ in range(300):
        box = random_box(rng, scale=1.5)
        poly = random_convex_polygon(rng, center=rng.uniform(-2, 2, size=2))
        packed, counts = pack_polygons([poly])
        c = box.mid
        hw = 0.5 * box.width
        sat = k.aabb_poly_sat(c[0], c[1], hw[0], hw[1], packed[0], counts[0])
        assert sat == geometry.box_polygon_intersect(box, poly)
        d = k.aabb_poly_dist(c[0], c[1], hw[0], hw[1], packed[0], counts[0])
        assert d == pytest.approx(geometry.box_polygon_clearance(box, poly), abs=1e-12)
        p = rng.uniform(-3, 3, size=2)
        assert k.point_poly_dist(p[0], p[1], packed[0], counts[0]) == pytest.approx(
            geometry.point_polygon_clearance(p, poly), abs=1e-12
        )
        assert k.point_in_poly(p[0], p[1], packed[0], counts[0]) == poly.contains(p)


def test_unsafe_mask_backends_agree_exactly():
    if knb is None:
        pytest.skip("numba backend unavailable")
    rng = np.random.default_rng(8)
    C, T = 60, 40
    # each cell's footprints cluster around an anchor so some cells stay clear
    anchors = rng.uniform(-2, 2, size=(C, 1, 2))
    centers = anchors + rng.uniform(-0.2, 0.2, size=(C, T, 2))
    halfw = rng.uniform(0.02, 0.1, size=(C, T))
    polys = [
        random_convex_polygon(rng, center=rng.uniform(-2, 2, size=2), scale=0.5)
        for _ in range(3)
    ]
    packed, counts = pack_polygons(polys)
    for buffer in (0.0, 0.15):
        a = knp.unsafe_mask(centers, halfw, 0.3, -0.2, 0.7, packed, counts, buffer)
        b = knb.unsafe_mask(centers, halfw, 0.3, -0.2, 0.7, packed, counts, buffer)
        assert np.array_equal(a, b)
        assert a.any() and not a.all()  # exercise both branches


def test_unsafe_mask_buffer_zero_matches_direct_sat(k):
    rng = np.random.default_rng(21)
    C, T = 30, 25
    centers = rng.uniform(-2, 2, size=(C, T, 2))
    halfw = rng.uniform(0.05, 0.3, size=(C, T))
    polys, (packed, counts) = _random_polys(rng, n=2)
    pose = (0.4, 0.1, -0.6)
    mask = k.unsafe_mask(centers, halfw, *pose, packed, counts, 0.0)
    ch, sh = math.cos(pose[2]), math.sin(pose[2])
    sc = abs(ch) + abs(sh)
    for ci in range(C):
        expect = False
        for ti in range(T):
            bx = pose[0] + ch * centers[ci, ti, 0] - sh * centers[ci, ti, 1]
            by = pose[1] + sh * centers[ci, ti, 0] + ch * centers[ci, ti, 1]
            hw = halfw[ci, ti] * sc
            box = geometry.IntervalVector([bx - hw, by - hw], [bx + hw, by + hw])
            if any(geometry.box_polygon_intersect(box, p) for p in polys):
                expect = True
                break
        assert mask[ci] == expect


def test_cell_min_distances_consistent(k):
    rng = np.random.default_rng(31)
    T = 30
    centers = rng.uniform(-1, 1, size=(T, 2))
    halfw = rng.uniform(0.05, 0.2, size=T)
    polys, (packed, counts) = _random_polys(rng, n=3)
    pose = (1.0, -0.5, 0.9)
    dists = k.cell_min_distances(centers, halfw, *pose, packed, counts)
    ch, sh = math.cos(pose[2]), math.sin(pose[2])
    sc = abs(ch) + abs(sh)
    for o, poly in enumerate(polys):
        best = math.inf
        for ti in range(T):
            bx = pose[0] + ch * centers[ti, 0] - sh * centers[ti, 1]
            by = pose[1] + sh * centers[ti, 0] + ch * centers[ti, 1]
            hw = halfw[ti] * sc
            box = geometry.IntervalVector([bx - hw, by - hw], [bx + hw, by + hw])
            best = min(best, geometry.box_polygon_clearance(box, poly))
        assert dists[o] == pytest.approx(best, abs=1e-12)


def test_first_hit_scan_order(k):
    # boxes marching in +x; obstacle 1 overlaps box 2 (so also the swept
    # hull of boxes 1-2), obstacle 0 overlaps box 4; the earliest index
    # wins even though obstacle order differs
    b_lo = np.array([[j * 1.0, 0.0] for j in range(6)])
    b_hi = b_lo + 0.4
    far = np.array([[4.0, 0.0], [4.4, 0.0], [4.4, 0.4], [4.0, 0.4]])
    near = np.array([[2.0, 0.0], [2.4, 0.0], [2.4, 0.4], [2.0, 0.4]])
    packed, counts = pack_polygons([far, near])
    j, o, kind = k.first_hit(b_lo, b_hi, packed, counts)
    assert (j, o, kind) == (1, 1, 1)


def test_first_hit_tie_prefers_lowest_obstacle(k):
    # at index 0: obstacle 1 hits box 0 itself, obstacle 0 hits only the
    # swept hull; the tie at index 0 resolves to obstacle 0
    b_lo = np.array([[0.0, 0.0], [2.0, 0.0]])
    b_hi = b_lo + 0.3
    mid = np.array([[1.0, 0.0], [1.2, 0.0], [1.2, 0.2], [1.0, 0.2]])
    inside = np.array([[0.1, 0.1], [0.2, 0.1], [0.2, 0.2], [0.1, 0.2]])
    packed, counts = pack_polygons([mid, inside])
    assert k.first_hit(b_lo, b_hi, packed, counts) == (0, 0, 1)
    # swapping obstacle order reports the box hit instead
    packed2, counts2 = pack_polygons([inside, mid])
    assert k.first_hit(b_lo, b_hi, packed2, counts2) == (0, 0, 0)


def test_first_hit_swept_hull_catches_tunnelling(k):
    # consecutive boxes straddle a thin wall; only the swept hull overlaps
    b_lo = np.array([[0.0, 0.0], [2.0, 0.0]])
    b_hi = b_lo + 0.3
    wall = np.array([[1.0, -1.0], [1.1, -1.0], [1.1, 1.0], [1.0, 1.0]])
    packed, counts = pack_polygons([wall])
    j, o, kind = k.first_hit(b_lo, b_hi, packed, counts)
    assert (j, o, kind) == (0, 0, 1)
    # and no hit at all when the wall is out of the swept corridor
    wall2 = np.array([[1.0, 2.0], [1.1, 2.0], [1.1, 3.0], [1.0, 3.0]])
    packed2, counts2 = pack_polygons([wall2])
    assert k.first_hit(b_lo, b_hi, packed2, counts2) == (-1, -1, -1)


def test_disk_clearances_matches_geometry(k):
    rng = np.random.default_rng(17)
    pts = rng.uniform(-3, 3, size=(50, 2))
    polys, (packed, counts) = _random_polys(rng, n=3)
    out = k.disk_clearances(pts, packed, counts)
    for i, p in enumerate(pts):
        ref = min(geometry.point_polygon_clearance(p, poly) for poly in polys)
        assert out[i] == pytest.approx(ref, abs=1e-12)


def test_patch_bounds_at(k):
    regions = [
        np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0]]),
        np.array([[1.0, 1.0], [3.0, 1.0], [3.0, 3.0], [1.0, 3.0]]),
    ]
    packed, counts = pack_polygons(regions)
    w_lo = np.array([[-0.1, 0.0], [0.0, -0.3]])
    w_hi = np.array([[0.1, 0.2], [0.05, 0.0]])
    # inside first only
    assert k.patch_bounds_at(0.5, 0.5, packed, counts, w_lo, w_hi) == (-0.1, 0.0, 0.1, 0.2, True)
    # inside both: hull
    assert k.patch_bounds_at(1.5, 1.5, packed, counts, w_lo, w_hi) == (-0.1, -0.3, 0.1, 0.2, True)
    # outside all
    assert k.patch_bounds_at(5.0, 5.0, packed, counts, w_lo, w_hi) == (0.0, 0.0, 0.0, 0.0, False)


def test_measured_bounds(k):
    regions = [np.array([[1.0, -1.0], [2.0, -1.0], [2.0, 1.0], [1.0, 1.0]])]
    packed, counts = pack_polygons(regions)
    w_lo = np.array([[-0.2, -0.1]])
    w_hi = np.array([[0.0, 0.3]])
    # footprints marching right; only indices whose box reaches x >= 1 hit
    b_lo = np.array([[0.0 + 0.3 * j, -0.1] for j in range(5)])
    b_hi = b_lo + 0.2
    out_lo, out_hi = k.measured_bounds(b_lo, b_hi, packed, counts, w_lo, w_hi)
    hits = [geometry.box_polygon_intersect(
        geometry.IntervalVector(b_lo[j], b_hi[j]),
        geometry.ConvexPolygon(regions[0]),
    ) for j in range(5)]
    for j in range(5):
        if hits[j]:
            assert np.array_equal(out_lo[j], w_lo[0]) and np.array_equal(out_hi[j], w_hi[0])
        else:
            assert np.array_equal(out_lo[j], [0.0, 0.0]) and np.array_equal(out_hi[j], [0.0, 0.0])
    assert any(hits) and not all(hits)
