"""Numba-compiled numeric kernels.

Twin of ``_numpy_impl``: every public function here has an identically
named, behaviorally equivalent implementation there. Expressions in the
sequential kernels are kept literally identical between the two files so
that degenerate cases agree bitwise; the equivalence suite in
tests/test_kernels.py guards against drift.

All polygon arguments arrive packed: vertices as a (n_polys, max_verts, 2)
float64 array with a (n_polys,) int64 count vector (see kernels.pack_polygons).
Polygons are convex with counterclockwise vertices.
"""

import math

import numpy as np
from numba import njit

OPTS = dict(cache=True, fastmath=False, nogil=True)

TWO_PI = 2.0 * math.pi
HALF_PI = 0.5 * math.pi


# ----------------------------------------------------------- interval trig


@njit(**OPTS)
def sin_range(lo, hi):
    a = math.sin(lo)
    b = math.sin(hi)
    if a <= b:
        out_lo = a
        out_hi = b
    else:
        out_lo = b
        out_hi = a
    n = math.ceil((lo - HALF_PI) / TWO_PI)
    if HALF_PI + TWO_PI * n <= hi:
        out_hi = 1.0
    n = math.ceil((lo + HALF_PI) / TWO_PI)
    if -HALF_PI + TWO_PI * n <= hi:
        out_lo = -1.0
    return out_lo, out_hi


@njit(**OPTS)
def cos_range(lo, hi):
    a = math.cos(lo)
    b = math.cos(hi)
    if a <= b:
        out_lo = a
        out_hi = b
    else:
        out_lo = b
        out_hi = a
    n = math.ceil(lo / TWO_PI)
    if TWO_PI * n <= hi:
        out_hi = 1.0
    n = math.ceil((lo - math.pi) / TWO_PI)
    if math.pi + TWO_PI * n <= hi:
        out_lo = -1.0
    return out_lo, out_hi


# ------------------------------------------------- commands & vector field


@njit(**OPTS)
def commands_at(t, v_cruise, w_cruise, t_plan, t_stop):
    """Desired (speed, yaw rate) at profile time t: constant over the
    cruise phase, linear ramp to zero over the fail-safe phase, zero after."""
    if t <= t_plan:
        return v_cruise, w_cruise
    lam = 1.0 - (t - t_plan) / t_stop
    if lam < 0.0:
        lam = 0.0
    return v_cruise * lam, w_cruise * lam


@njit(**OPTS)
def field(h, v, t, v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wx, wy):
    """Closed-loop derivative (dx, dy, dh, dv); independent of x and y."""
    vd, wd = commands_at(t, v_cruise, w_cruise, t_plan, t_stop)
    a = k_a * (vd - v)
    if a > a_max:
        a = a_max
    elif a < -a_max:
        a = -a_max
    return v * math.cos(h) + wx, v * math.sin(h) + wy, wd, a


@njit(**OPTS)
def rk4_step(x, y, h, v, t, dt, v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wx, wy):
    half = 0.5 * dt
    k1x, k1y, k1h, k1v = field(h, v, t, v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wx, wy)
    k2x, k2y, k2h, k2v = field(
        h + half * k1h, v + half * k1v, t + half,
        v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wx, wy,
    )
    k3x, k3y, k3h, k3v = field(
        h + half * k2h, v + half * k2v, t + half,
        v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wx, wy,
    )
    k4x, k4y, k4h, k4v = field(
        h + dt * k3h, v + dt * k3v, t + dt,
        v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wx, wy,
    )
    sixth = dt / 6.0
    return (
        x + sixth * (k1x + 2.0 * k2x + 2.0 * k3x + k4x),
        y + sixth * (k1y + 2.0 * k2y + 2.0 * k3y + k4y),
        h + sixth * (k1h + 2.0 * k2h + 2.0 * k3h + k4h),
        v + sixth * (k1v + 2.0 * k2v + 2.0 * k3v + k4v),
    )


@njit(**OPTS)
def rollout(state0, t0, dt, n, v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, w):
    """n fixed RK4 steps from state0 with per-step constant disturbance w (n, 2)."""
    out = np.empty((n + 1, 4))
    x = state0[0]
    y = state0[1]
    h = state0[2]
    v = state0[3]
    out[0, 0] = x
    out[0, 1] = y
    out[0, 2] = h
    out[0, 3] = v
    for i in range(n):
        t = t0 + i * dt
        x, y, h, v = rk4_step(
            x, y, h, v, t, dt, v_cruise, w_cruise, t_plan, t_stop, k_a, a_max,
            w[i, 0], w[i, 1],
        )
        out[i + 1, 0] = x
        out[i + 1, 1] = y
        out[i + 1, 2] = h
        out[i + 1, 3] = v
    return out


# -------------------------------------------------------- embedding system


@njit(**OPTS)
def emb_deriv(
    xl, yl, hl, vl, xu, yu, hu, vu, t,
    v_cruise, w_cruise, t_plan, t_stop, k_a, a_max,
    wxl, wyl, wxu, wyu,
):
    """Derivative of the 8-dim embedding state (componentwise face
    evaluations of the interval inclusion of `field`).

    Position rates do not depend on their own components, so their face
    evaluations reduce to the inclusion bounds over the full (v, h) box;
    the v component depends only on itself, so its faces are the exact
    scalar field at each v endpoint.
    """
    vd, wd = commands_at(t, v_cruise, w_cruise, t_plan, t_stop)
    cl, cu = cos_range(hl, hu)
    sl, su = sin_range(hl, hu)

    p1 = vl * cl
    p2 = vl * cu
    p3 = vu * cl
    p4 = vu * cu
    pmin = min(min(p1, p2), min(p3, p4))
    pmax = max(max(p1, p2), max(p3, p4))

    q1 = vl * sl
    q2 = vl * su
    q3 = vu * sl
    q4 = vu * su
    qmin = min(min(q1, q2), min(q3, q4))
    qmax = max(max(q1, q2), max(q3, q4))

    al = k_a * (vd - vl)
    if al > a_max:
        al = a_max
    elif al < -a_max:
        al = -a_max
    au = k_a * (vd - vu)
    if au > a_max:
        au = a_max
    elif au < -a_max:
        au = -a_max

    return (
        pmin + wxl, qmin + wyl, wd, al,
        pmax + wxu, qmax + wyu, wd, au,
    )


@njit(**OPTS)
def tube_rk4(
    lo0, hi0, t0, dt, n,
    v_cruise, w_cruise, t_plan, t_stop, k_a, a_max,
    w_lo, w_hi, pad,
):
    """Fixed-step RK4 on the embedding system.

    w_lo/w_hi: (n, 2) disturbance bounds valid over each step.
    pad: (4,) symmetric inflation added after every step.
    Returns (lo (n+1,4), hi (n+1,4), fail) where fail is the first index at
    which the componentwise order lo <= hi broke, or -1 if it never did.
    """
    lo = np.empty((n + 1, 4))
    hi = np.empty((n + 1, 4))
    xl = lo0[0]
    yl = lo0[1]
    hl = lo0[2]
    vl = lo0[3]
    xu = hi0[0]
    yu = hi0[1]
    hu = hi0[2]
    vu = hi0[3]
    lo[0, 0] = xl
    lo[0, 1] = yl
    lo[0, 2] = hl
    lo[0, 3] = vl
    hi[0, 0] = xu
    hi[0, 1] = yu
    hi[0, 2] = hu
    hi[0, 3] = vu
    half = 0.5 * dt
    sixth = dt / 6.0
    fail = -1
    for i in range(n):
        t = t0 + i * dt
        wxl = w_lo[i, 0]
        wyl = w_lo[i, 1]
        wxu = w_hi[i, 0]
        wyu = w_hi[i, 1]
        (k1xl, k1yl, k1hl, k1vl, k1xu, k1yu, k1hu, k1vu) = emb_deriv(
            xl, yl, hl, vl, xu, yu, hu, vu, t,
            v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wxl, wyl, wxu, wyu,
        )
        (k2xl, k2yl, k2hl, k2vl, k2xu, k2yu, k2hu, k2vu) = emb_deriv(
            xl + half * k1xl, yl + half * k1yl, hl + half * k1hl, vl + half * k1vl,
            xu + half * k1xu, yu + half * k1yu, hu + half * k1hu, vu + half * k1vu,
            t + half,
            v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wxl, wyl, wxu, wyu,
        )
        (k3xl, k3yl, k3hl, k3vl, k3xu, k3yu, k3hu, k3vu) = emb_deriv(
            xl + half * k2xl, yl + half * k2yl, hl + half * k2hl, vl + half * k2vl,
            xu + half * k2xu, yu + half * k2yu, hu + half * k2hu, vu + half * k2vu,
            t + half,
            v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wxl, wyl, wxu, wyu,
        )
        (k4xl, k4yl, k4hl, k4vl, k4xu, k4yu, k4hu, k4vu) = emb_deriv(
            xl + dt * k3xl, yl + dt * k3yl, hl + dt * k3hl, vl + dt * k3vl,
            xu + dt * k3xu, yu + dt * k3yu, hu + dt * k3hu, vu + dt * k3vu,
            t + dt,
            v_cruise, w_cruise, t_plan, t_stop, k_a, a_max, wxl, wyl, wxu, wyu,
        )
        xl = xl + sixth * (k1xl + 2.0 * k2xl + 2.0 * k3xl + k4xl) - pad[0]
        yl = yl + sixth * (k1yl + 2.0 * k2yl + 2.0 * k3yl + k4yl) - pad[1]
        hl = hl + sixth * (k1hl + 2.0 * k2hl + 2.0 * k3hl + k4hl) - pad[2]
        vl = vl + sixth * (k1vl + 2.0 * k2vl + 2.0 * k3vl + k4vl) - pad[3]
        xu = xu + sixth * (k1xu + 2.0 * k2xu + 2.0 * k3xu + k4xu) + pad[0]
        yu = yu + sixth * (k1yu + 2.0 * k2yu + 2.0 * k3yu + k4yu) + pad[1]
        hu = hu + sixth * (k1hu + 2.0 * k2hu + 2.0 * k3hu + k4hu) + pad[2]
        vu = vu + sixth * (k1vu + 2.0 * k2vu + 2.0 * k3vu + k4vu) + pad[3]
        lo[i + 1, 0] = xl
        lo[i + 1, 1] = yl
        lo[i + 1, 2] = hl
        lo[i + 1, 3] = vl
        hi[i + 1, 0] = xu
        hi[i + 1, 1] = yu
        hi[i + 1, 2] = hu
        hi[i + 1, 3] = vu
        if xl > xu or yl > yu or hl > hu or vl > vu:
            fail = i + 1
            break
    return lo, hi, fail


@njit(**OPTS)
def mc_max_violation(
    x0, t0, dt, n,
    v_cruise, w_cruise, t_plan, t_stop, k_a, a_max,
    w, lo, hi,
):
    """Worst tube-containment violation over a batch of sampled rollouts.

    x0: (B, 4) initial states; w: (B, n, 2) per-step disturbances;
    lo/hi: (n+1, 4) tube bounds. Returns max over samples, steps, and
    components of max(lo - state, state - hi); <= 0 means all contained.
    """
    worst = -1.0e300
    n_batch = x0.shape[0]
    for b in range(n_batch):
        x = x0[b, 0]
        y = x0[b, 1]
        h = x0[b, 2]
        v = x0[b, 3]
        for j in range(n + 1):
            if j > 0:
                t = t0 + (j - 1) * dt
                x, y, h, v = rk4_step(
                    x, y, h, v, t, dt,
                    v_cruise, w_cruise, t_plan, t_stop, k_a, a_max,
                    w[b, j - 1, 0], w[b, j - 1, 1],
                )
            d0 = max(lo[j, 0] - x, x - hi[j, 0])
            d1 = max(lo[j, 1] - y, y - hi[j, 1])
            d2 = max(lo[j, 2] - h, h - hi[j, 2])
            d3 = max(lo[j, 3] - v, v - hi[j, 3])
            d = max(max(d0, d1), max(d2, d3))
            if d > worst:
                worst = d
    return worst


@njit(**OPTS)
def tracking_dev_batch(
    v0, v_cruise, w_cruise, dt, stride, n_ref,
    t_plan, t_stop, k_a, a_max, ref,
):
    """Position deviation between simulated tracking runs and reference
    positions, sampled every `stride` sim steps.

    v0/v_cruise/w_cruise: (B,) per-sample; ref: (B, n_ref, 2).
    Returns (B, n_ref) deviations.
    """
    n_batch = v0.shape[0]
    dev = np.empty((n_batch, n_ref))
    n_steps = stride * (n_ref - 1)
    for b in range(n_batch):
        x = 0.0
        y = 0.0
        h = 0.0
        v = v0[b]
        dev[b, 0] = math.sqrt(
            (x - ref[b, 0, 0]) * (x - ref[b, 0, 0])
            + (y - ref[b, 0, 1]) * (y - ref[b, 0, 1])
        )
        for i in range(n_steps):
            t = i * dt
            x, y, h, v = rk4_step(
                x, y, h, v, t, dt,
                v_cruise[b], w_cruise[b], t_plan, t_stop, k_a, a_max, 0.0, 0.0,
            )
            if (i + 1) % stride == 0:
                j = (i + 1) // stride
                dev[b, j] = math.sqrt(
                    (x - ref[b, j, 0]) * (x - ref[b, j, 0])
                    + (y - ref[b, j, 1]) * (y - ref[b, j, 1])
                )
    return dev


# -------------------------------------------------------- collision kernels


@njit(**OPTS)
def point_in_poly(px, py, verts, nv):
    for i in range(nv):
        j = i + 1
        if j == nv:
            j = 0
        ex = verts[j, 0] - verts[i, 0]
        ey = verts[j, 1] - verts[i, 1]
        if ex * (py - verts[i, 1]) - ey * (px - verts[i, 0]) < 0.0:
            return False
    return True


@njit(**OPTS)
def point_poly_dist(px, py, verts, nv):
    if point_in_poly(px, py, verts, nv):
        return 0.0
    best = 1.0e300
    for i in range(nv):
        j = i + 1
        if j == nv:
            j = 0
        ax = verts[i, 0]
        ay = verts[i, 1]
        ex = verts[j, 0] - ax
        ey = verts[j, 1] - ay
        tt = ((px - ax) * ex + (py - ay) * ey) / (ex * ex + ey * ey)
        if tt < 0.0:
            tt = 0.0
        elif tt > 1.0:
            tt = 1.0
        qx = ax + tt * ex
        qy = ay + tt * ey
        d = math.sqrt((px - qx) * (px - qx) + (py - qy) * (py - qy))
        if d < best:
            best = d
    return best


@njit(**OPTS)
def aabb_poly_sat(cx, cy, hx, hy, verts, nv):
    """Closed-set separating-axis test: box axes plus polygon edge normals."""
    vminx = 1.0e300
    vmaxx = -1.0e300
    vminy = 1.0e300
    vmaxy = -1.0e300
    for i in range(nv):
        if verts[i, 0] < vminx:
            vminx = verts[i, 0]
        if verts[i, 0] > vmaxx:
            vmaxx = verts[i, 0]
        if verts[i, 1] < vminy:
            vminy = verts[i, 1]
        if verts[i, 1] > vmaxy:
            vmaxy = verts[i, 1]
    if vminx > cx + hx or vmaxx < cx - hx:
        return False
    if vminy > cy + hy or vmaxy < cy - hy:
        return False
    for i in range(nv):
        j = i + 1
        if j == nv:
            j = 0
        ex = verts[j, 0] - verts[i, 0]
        ey = verts[j, 1] - verts[i, 1]
        nx = ey
        ny = -ex
        pmin = 1.0e300
        pmax = -1.0e300
        for m in range(nv):
            p = verts[m, 0] * nx + verts[m, 1] * ny
            if p < pmin:
                pmin = p
            if p > pmax:
                pmax = p
        c = cx * nx + cy * ny
        r = hx * abs(nx) + hy * abs(ny)
        if pmin > c + r or pmax < c - r:
            return False
    return True


@njit(**OPTS)
def aabb_poly_dist(cx, cy, hx, hy, verts, nv):
    """Exact clearance between a closed box and a closed convex polygon;
    0.0 when they intersect (matches aabb_poly_sat exactly)."""
    if aabb_poly_sat(cx, cy, hx, hy, verts, nv):
        return 0.0
    best = 1.0e300
    lox = cx - hx
    hix = cx + hx
    loy = cy - hy
    hiy = cy + hy
    for i in range(nv):
        gx = lox - verts[i, 0]
        if verts[i, 0] - hix > gx:
            gx = verts[i, 0] - hix
        if gx < 0.0:
            gx = 0.0
        gy = loy - verts[i, 1]
        if verts[i, 1] - hiy > gy:
            gy = verts[i, 1] - hiy
        if gy < 0.0:
            gy = 0.0
        d = math.sqrt(gx * gx + gy * gy)
        if d < best:
            best = d
    d = point_poly_dist(lox, loy, verts, nv)
    if d < best:
        best = d
    d = point_poly_dist(hix, loy, verts, nv)
    if d < best:
        best = d
    d = point_poly_dist(hix, hiy, verts, nv)
    if d < best:
        best = d
    d = point_poly_dist(lox, hiy, verts, nv)
    if d < best:
        best = d
    return best


# ------------------------------------------------------ planner-side kernels


@njit(**OPTS)
def unsafe_mask(centers, halfw, px, py, ph, polys, counts, buffer):
    """Per-cell unsafe flags for a footprint table posed in the world.

    centers: (C, T, 2) body-frame box centers; halfw: (C, T) half-widths of
    the square body boxes; (px, py, ph) the current pose. A cell is unsafe
    iff any of its world-frame footprint boxes comes within `buffer` of any
    obstacle (buffer 0.0 reduces to the closed-set intersection test).
    """
    n_cells = centers.shape[0]
    n_times = centers.shape[1]
    n_polys = polys.shape[0]
    ch = math.cos(ph)
    sh = math.sin(ph)
    sc = abs(ch) + abs(sh)
    out = np.zeros(n_cells, dtype=np.bool_)
    for c in range(n_cells):
        hit = False
        for ti in range(n_times):
            bx = px + ch * centers[c, ti, 0] - sh * centers[c, ti, 1]
            by = py + sh * centers[c, ti, 0] + ch * centers[c, ti, 1]
            hw = halfw[c, ti] * sc
            for o in range(n_polys):
                if buffer == 0.0:
                    if aabb_poly_sat(bx, by, hw, hw, polys[o], counts[o]):
                        hit = True
                        break
                else:
                    if aabb_poly_dist(bx, by, hw, hw, polys[o], counts[o]) <= buffer:
                        hit = True
                        break
            if hit:
                break
        out[c] = hit
    return out


@njit(**OPTS)
def cell_min_distances(centers, halfw, px, py, ph, polys, counts):
    """Min-over-time clearance between one cell's posed footprint boxes and
    each obstacle. centers: (T, 2); halfw: (T,). Returns (n_polys,)."""
    n_times = centers.shape[0]
    n_polys = polys.shape[0]
    ch = math.cos(ph)
    sh = math.sin(ph)
    sc = abs(ch) + abs(sh)
    out = np.empty(n_polys)
    for o in range(n_polys):
        best = 1.0e300
        for ti in range(n_times):
            bx = px + ch * centers[ti, 0] - sh * centers[ti, 1]
            by = py + sh * centers[ti, 0] + ch * centers[ti, 1]
            hw = halfw[ti] * sc
            d = aabb_poly_dist(bx, by, hw, hw, polys[o], counts[o])
            if d < best:
                best = d
                if best == 0.0:
                    break
        out[o] = best
    return out


# ----------------------------------------------------- verifier-side kernels


@njit(**OPTS)
def first_hit(b_lo, b_hi, polys, counts):
    """Earliest collision scan over position boxes and swept hulls.

    b_lo/b_hi: (N+1, 2) box bounds. At each time index j, obstacles are
    tried in order; for each, box j is checked before the swept hull of
    (j, j+1), so the earliest index wins and ties at one index go to the
    lowest obstacle index. Returns (time_index, obstacle_index, kind) with
    kind 0 = box, 1 = hull, or (-1, -1, -1) when nothing intersects.
    """
    n_boxes = b_lo.shape[0]
    n_polys = polys.shape[0]
    for j in range(n_boxes):
        cx = 0.5 * (b_lo[j, 0] + b_hi[j, 0])
        cy = 0.5 * (b_lo[j, 1] + b_hi[j, 1])
        hx = 0.5 * (b_hi[j, 0] - b_lo[j, 0])
        hy = 0.5 * (b_hi[j, 1] - b_lo[j, 1])
        has_hull = j + 1 < n_boxes
        hcx = 0.0
        hcy = 0.0
        hhx = 0.0
        hhy = 0.0
        if has_hull:
            lx = min(b_lo[j, 0], b_lo[j + 1, 0])
            ly = min(b_lo[j, 1], b_lo[j + 1, 1])
            ux = max(b_hi[j, 0], b_hi[j + 1, 0])
            uy = max(b_hi[j, 1], b_hi[j + 1, 1])
            hcx = 0.5 * (lx + ux)
            hcy = 0.5 * (ly + uy)
            hhx = 0.5 * (ux - lx)
            hhy = 0.5 * (uy - ly)
        for o in range(n_polys):
            if aabb_poly_sat(cx, cy, hx, hy, polys[o], counts[o]):
                return j, o, 0
            if has_hull and aabb_poly_sat(hcx, hcy, hhx, hhy, polys[o], counts[o]):
                return j, o, 1
    return -1, -1, -1


# ------------------------------------------------------ harness-side kernels


@njit(**OPTS)
def disk_clearances(points, polys, counts):
    """Min clearance from each point to the nearest obstacle. (N, 2) -> (N,)."""
    n_pts = points.shape[0]
    n_polys = polys.shape[0]
    out = np.empty(n_pts)
    for i in range(n_pts):
        best = 1.0e300
        for o in range(n_polys):
            d = point_poly_dist(points[i, 0], points[i, 1], polys[o], counts[o])
            if d < best:
                best = d
        out[i] = best
    return out


@njit(**OPTS)
def patch_bounds_at(px, py, regions, counts, w_lo, w_hi):
    """Interval hull of the bounds of every patch whose region contains the
    point; (0,0,0,0, False) when the point is outside all patches."""
    n_patches = regions.shape[0]
    xl = 0.0
    yl = 0.0
    xu = 0.0
    yu = 0.0
    found = False
    for p in range(n_patches):
        if point_in_poly(px, py, regions[p], counts[p]):
            if not found:
                xl = w_lo[p, 0]
                yl = w_lo[p, 1]
                xu = w_hi[p, 0]
                yu = w_hi[p, 1]
                found = True
            else:
                if w_lo[p, 0] < xl:
                    xl = w_lo[p, 0]
                if w_lo[p, 1] < yl:
                    yl = w_lo[p, 1]
                if w_hi[p, 0] > xu:
                    xu = w_hi[p, 0]
                if w_hi[p, 1] > yu:
                    yu = w_hi[p, 1]
    return xl, yl, xu, yu, found


@njit(**OPTS)
def measured_bounds(b_lo, b_hi, regions, counts, w_lo, w_hi):
    """Disturbance bounds per time index: hull of patch bounds over patches
    intersecting the footprint box at that index; zero when none do."""
    n_idx = b_lo.shape[0]
    n_patches = regions.shape[0]
    out_lo = np.zeros((n_idx, 2))
    out_hi = np.zeros((n_idx, 2))
    for j in range(n_idx):
        cx = 0.5 * (b_lo[j, 0] + b_hi[j, 0])
        cy = 0.5 * (b_lo[j, 1] + b_hi[j, 1])
        hx = 0.5 * (b_hi[j, 0] - b_lo[j, 0])
        hy = 0.5 * (b_hi[j, 1] - b_lo[j, 1])
        found = False
        for p in range(n_patches):
            if aabb_poly_sat(cx, cy, hx, hy, regions[p], counts[p]):
                if not found:
                    out_lo[j, 0] = w_lo[p, 0]
                    out_lo[j, 1] = w_lo[p, 1]
                    out_hi[j, 0] = w_hi[p, 0]
                    out_hi[j, 1] = w_hi[p, 1]
                    found = True
                else:
                    if w_lo[p, 0] < out_lo[j, 0]:
                        out_lo[j, 0] = w_lo[p, 0]
                    if w_lo[p, 1] < out_lo[j, 1]:
                        out_lo[j, 1] = w_lo[p, 1]
                    if w_hi[p, 0] > out_hi[j, 0]:
                        out_hi[j, 0] = w_hi[p, 0]
                    if w_hi[p, 1] > out_hi[j, 1]:
                        out_hi[j, 1] = w_hi[p, 1]
    return out_lo, out_hi
