"""Backend dispatch for the numeric kernels.

Two interchangeable implementations exist:

* ``_numba_impl`` - @njit-compiled (cache=True, fastmath off), the default
  when numba imports cleanly;
* ``_numpy_impl`` - interpreted / vectorized numpy fallback.

Selection is made once at import time from the ``TUBEPLAN_BACKEND``
environment variable (``numba`` | ``numpy`` | unset = auto). The active
choice is exposed as ``BACKEND``. Both implementation modules remain
importable directly, which is how the equivalence tests and the backend
benchmark compare them.
"""

import os

import numpy as np

_choice = os.environ.get("TUBEPLAN_BACKEND", "").strip().lower()

if _choice == "numpy":
    from . import _numpy_impl as _impl

    BACKEND = "numpy"
elif _choice == "numba":
    from . import _numba_impl as _impl

    BACKEND = "numba"
elif _choice in ("", "auto"):
    try:
        from . import _numba_impl as _impl

        BACKEND = "numba"
    except ImportError:
        from . import _numpy_impl as _impl

        BACKEND = "numpy"
else:
    raise RuntimeError(
        f"TUBEPLAN_BACKEND={_choice!r} not understood; use 'numba' or 'numpy'"
    )

sin_range = _impl.sin_range
cos_range = _impl.cos_range
commands_at = _impl.commands_at
field = _impl.field
rk4_step = _impl.rk4_step
rollout = _impl.rollout
emb_deriv = _impl.emb_deriv
tube_rk4 = _impl.tube_rk4
mc_max_violation = _impl.mc_max_violation
tracking_dev_batch = _impl.tracking_dev_batch
point_in_poly = _impl.point_in_poly
point_poly_dist = _impl.point_poly_dist
aabb_poly_sat = _impl.aabb_poly_sat
aabb_poly_dist = _impl.aabb_poly_dist
unsafe_mask = _impl.unsafe_mask
cell_min_distances = _impl.cell_min_distances
first_hit = _impl.first_hit
disk_clearances = _impl.disk_clearances
patch_bounds_at = _impl.patch_bounds_at
measured_bounds = _impl.measured_bounds


def pack_polygons(polygons):
    """Pack a list of ConvexPolygon (or raw (n,2) vertex arrays) into the
    padded (n_polys, max_verts, 2) float64 + (n_polys,) int64 count form
    the kernels take. An empty list packs to a (0, 3, 2) array."""
    arrays = [
        np.asarray(getattr(p, "vertices", p), dtype=float) for p in polygons
    ]
    if not arrays:
        return np.zeros((0, 3, 2)), np.zeros(0, dtype=np.int64)
    vmax = max(a.shape[0] for a in arrays)
    out = np.zeros((len(arrays), vmax, 2))
    counts = np.empty(len(arrays), dtype=np.int64)
    for i, a in enumerate(arrays):
        out[i, : a.shape[0]] = a
        counts[i] = a.shape[0]
    return out, counts


def warmup():
    """Exercise every kernel once on tiny inputs so one-time compilation
    cost (numba backend) is paid before anything is timed."""
    square = np.array([[(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]])
    counts = np.array([4], dtype=np.int64)
    state = np.array([0.0, 0.0, 0.0, 1.0])
    w2 = np.zeros((2, 2))
    pad = np.zeros(4)
    sin_range(0.0, 1.0)
    cos_range(0.0, 1.0)
    commands_at(0.5, 1.0, 0.5, 1.5, 1.0)
    field(0.0, 1.0, 0.0, 1.0, 0.5, 1.5, 1.0, 4.0, 2.0, 0.0, 0.0)
    rk4_step(0.0, 0.0, 0.0, 1.0, 0.0, 0.01, 1.0, 0.5, 1.5, 1.0, 4.0, 2.0, 0.0, 0.0)
    rollout(state, 0.0, 0.01, 2, 1.0, 0.5, 1.5, 1.0, 4.0, 2.0, w2)
    emb_deriv(
        0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0,
        1.0, 0.5, 1.5, 1.0, 4.0, 2.0, 0.0, 0.0, 0.0, 0.0,
    )
    tube_rk4(
        state, state, 0.0, 0.01, 2,
        1.0, 0.5, 1.5, 1.0, 4.0, 2.0, w2, w2, pad,
    )
    mc_max_violation(
        state.reshape(1, 4), 0.0, 0.01, 2,
        1.0, 0.5, 1.5, 1.0, 4.0, 2.0,
        np.zeros((1, 2, 2)), np.zeros((3, 4)) - 10.0, np.zeros((3, 4)) + 10.0,
    )
    tracking_dev_batch(
        np.array([1.0]), np.array([1.0]), np.array([0.0]),
        0.005, 2, 2, 1.5, 1.0, 4.0, 2.0, np.zeros((1, 2, 2)),
    )
    point_in_poly(0.5, 0.5, square[0], 4)
    point_poly_dist(2.0, 0.5, square[0], 4)
    aabb_poly_sat(0.5, 0.5, 0.1, 0.1, square[0], 4)
    aabb_poly_dist(3.0, 0.5, 0.1, 0.1, square[0], 4)
    unsafe_mask(np.zeros((2, 2, 2)), np.full((2, 2), 0.1), 0.0, 0.0, 0.0, square, counts, 0.0)
    unsafe_mask(np.zeros((2, 2, 2)), np.full((2, 2), 0.1), 0.0, 0.0, 0.0, square, counts, 0.05)
    cell_min_distances(np.zeros((2, 2)), np.full(2, 0.1), 0.0, 0.0, 0.0, square, counts)
    first_hit(np.zeros((3, 2)) + 4.0, np.zeros((3, 2)) + 4.1, square, counts)
    disk_clearances(np.zeros((2, 2)), square, counts)
    patch_bounds_at(0.5, 0.5, square, counts, np.zeros((1, 2)), np.ones((1, 2)))
    measured_bounds(
        np.zeros((2, 2)), np.ones((2, 2)) * 0.2, square, counts,
        np.zeros((1, 2)), np.ones((1, 2)),
    )
