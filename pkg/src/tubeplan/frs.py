"""Offline sampled forward reachable set over (parameter, time).

The planning model is flowed from the body-frame origin for every parameter
on a regular grid over the unit square.  Each grid point owns the
surrounding parameter cell; its footprint at each time is a square box
around the grid point's position, padded by the robot radius plus the
cell's position sensitivity (the largest deviation of the flow across a
3 x 3 stencil of the cell and the half-step time window, so the union of
cell footprints covers every admissible parameter at every time).  An
optional tracking-error inflation widens the boxes further to cover
imperfect tracking by the high-fidelity vehicle.

The table is queried online in two ways: projecting workspace obstacles to
a boolean mask over parameter cells, and evaluating per-obstacle clearance
constraints for a single parameter.  Both share one distance kernel so mask
and constraint signs agree exactly.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import kernels
from .dynamics import PlanState, TrajParam, VehicleLimits, plan_positions
from .geometry import Interval

_CACHE_MAGIC = b"FRSTBL01"


@dataclass(frozen=True)
class FrsTable:
    """Sampled forward reachable set on a parameter grid.

    ``centers``/``halfw_base`` give, per parameter cell and time index, the
    body-frame footprint box (center and half-width including robot radius
    and cell sensitivity).  ``inflation`` is an optional extra per-cell,
    per-time pad; ``halfw`` is the effective half-width including it.
    """

    k_values: np.ndarray       # (n_k,) grid coordinates per axis
    t_grid: np.ndarray         # (T,) seconds
    centers: np.ndarray        # (C, T, 2) body-frame positions
    halfw_base: np.ndarray     # (C, T) box half-widths, no inflation
    robot_radius: float
    params_hash: str
    inflation: Optional[np.ndarray] = None  # (C, T) or None

    def __post_init__(self):
        n_k = self.k_values.shape[0]
        n_t = self.t_grid.shape[0]
        c = n_k * n_k
        if self.centers.shape != (c, n_t, 2) or self.halfw_base.shape != (c, n_t):
            raise ValueError("footprint array shapes do not match the grids")
        if self.inflation is not None:
            if self.inflation.shape != (c, n_t):
                raise ValueError("inflation shape does not match the grids")
            if np.any(self.inflation < 0):
                raise ValueError("inflation must be nonnegative")
            halfw = self.halfw_base + self.inflation
        else:
            halfw = self.halfw_base
        object.__setattr__(self, "halfw", halfw)
        for arr in (self.k_values, self.t_grid, self.centers,
                    self.halfw_base, self.inflation, halfw):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def n_k(self) -> int:
        return self.k_values.shape[0]

    @property
    def n_cells(self) -> int:
        return self.n_k * self.n_k

    @property
    def delta(self) -> float:
        """Grid spacing per parameter axis."""
        return 2.0 / (self.n_k - 1)

    def cell_index(self, k1: float, k2: float) -> int:
        """Flat index of the cell owning (k1, k2)."""
        n = self.n_k
        i1 = int(np.clip(round((k1 + 1.0) / self.delta), 0, n - 1))
        i2 = int(np.clip(round((k2 + 1.0) / self.delta), 0, n - 1))
        return i1 * n + i2

    def cell_param(self, cell: int) -> TrajParam:
        """Grid parameter at a cell's center."""
        i1, i2 = divmod(cell, self.n_k)
        return TrajParam(float(self.k_values[i1]), float(self.k_values[i2]))

    def cell_box(self, cell: int):
        """Parameter bounds of a cell, clipped to the unit square."""
        i1, i2 = divmod(cell, self.n_k)
        half = 0.5 * self.delta
        lo = np.array([
            max(-1.0, self.k_values[i1] - half),
            max(-1.0, self.k_values[i2] - half),
        ])
        hi = np.array([
            min(1.0, self.k_values[i1] + half),
            min(1.0, self.k_values[i2] + half),
        ])
        return lo, hi

    def footprint_track(self, cell: int, pose: PlanState):
        """World-frame footprint boxes of one cell across all times.

        The body box is rotated by the pose heading and re-boxed
        conservatively, then translated.  Returns (lo, hi), each (T, 2).
        """
        ch, sh = np.cos(pose.h), np.sin(pose.h)
        c = self.centers[cell]
        cx = pose.x + ch * c[:, 0] - sh * c[:, 1]
        cy = pose.y + sh * c[:, 0] + ch * c[:, 1]
        hw = self.halfw[cell] * (abs(ch) + abs(sh))
        lo = np.stack([cx - hw, cy - hw], axis=1)
        hi = np.stack([cx + hw, cy + hw], axis=1)
        return lo, hi


@dataclass(frozen=True)
class TrackingErrorBound:
    """Worst-case position deviation per time index, in meters.

    ``values`` has shape (T,) for a parameter-uniform bound or (C, T) for a
    per-cell bound.
    """

    t_grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape[-1] != self.t_grid.shape[0]:
            raise ValueError("bound length does not match the time grid")
        if np.any(self.values < 0):
            raise ValueError("tracking error bound must be nonnegative")
        self.t_grid.setflags(write=False)
        self.values.setflags(write=False)


def _params_hash(lim: VehicleLimits, n_k: int, dt_frs: float, robot_radius: float) -> str:
    payload = struct.pack(
        "<8dq",
        lim.v_max, lim.w_max, lim.a_max, lim.k_a, lim.t_plan, lim.t_stop,
        dt_frs, robot_radius, n_k,
    )
    return hashlib.sha256(payload).hexdigest()


def _time_grid(lim: VehicleLimits, dt_frs: float) -> np.ndarray:
    horizon = lim.horizon
    n_t = int(round(horizon / dt_frs))
    if abs(n_t * dt_frs - horizon) > 1e-9:
        raise ValueError("frs time step must divide the profile horizon")
    return np.arange(n_t + 1) * dt_frs


def build_frs(
    lim: VehicleLimits,
    n_k: int = 41,
    dt_frs: float = 0.025,
    robot_radius: float = 0.2,
) -> FrsTable:
    """Build the sampled reachable-set table for a vehicle configuration.

    The grid must be odd-sized so the zero parameter is a grid point.  The
    per-cell sensitivity pad is the largest componentwise deviation of the
    planning flow over the cell's 3 x 3 parameter stencil (corners, edge
    midpoints, center) and over the half-step time window around each
    sample, so each footprint covers its whole (parameter cell) x (time
    slot) patch of the flow.
    """
    if n_k < 3 or n_k % 2 == 0:
        raise ValueError("n_k must be an odd integer >= 3")
    if dt_frs <= 0:
        raise ValueError("dt_frs must be positive")
    t_grid = _time_grid(lim, dt_frs)
    n_t = t_grid.shape[0]

    grid = np.linspace(-1.0, 1.0, n_k)
    bounds = np.concatenate(([-1.0], 0.5 * (grid[:-1] + grid[1:]), [1.0]))
    # interleave cell boundaries and centers: u[2i] = bound i, u[2i+1] = grid i
    u = np.empty(2 * n_k + 1)
    u[0::2] = bounds
    u[1::2] = grid

    k1 = np.repeat(u, u.shape[0])
    k2 = np.tile(u, u.shape[0])
    v_cruise = (k2 + 1.0) / 2.0 * lim.v_max
    w_cruise = k1 * lim.w_max
    m = u.shape[0]
    time_offsets = (
        np.clip(t_grid - 0.5 * dt_frs, 0.0, lim.horizon),
        t_grid,
        np.clip(t_grid + 0.5 * dt_frs, 0.0, lim.horizon),
    )
    snapshots = [
        plan_positions(v_cruise, w_cruise, ts, lim.t_plan, lim.t_stop)
        .reshape(m, m, n_t, 2)
        for ts in time_offsets
    ]
    ctr = snapshots[1][1::2, 1::2]  # (n_k, n_k, n_t, 2)
    pad = np.zeros((n_k, n_k, n_t))
    for pos in snapshots:
        for da in range(3):
            for db in range(3):
                window = pos[da::2, db::2][:n_k, :n_k]
                np.maximum(pad, np.abs(window - ctr).max(axis=3), out=pad)

    centers = np.ascontiguousarray(ctr.reshape(n_k * n_k, n_t, 2))
    halfw_base = np.ascontiguousarray(robot_radius + pad.reshape(n_k * n_k, n_t))
    return FrsTable(
        k_values=grid,
        t_grid=t_grid,
        centers=centers,
        halfw_base=halfw_base,
        robot_radius=robot_radius,
        params_hash=_params_hash(lim, n_k, dt_frs, robot_radius),
    )


def estimate_tracking_error(
    lim: VehicleLimits,
    n_samples: int,
    v0_range,
    seed: int,
    dt_frs: float = 0.025,
    substeps: int = 5,
) -> TrackingErrorBound:
    """Sampled worst-case deviation of the vehicle from its plan.

    ``v0_range`` is an interval of initial-speed offsets relative to the
    commanded cruise speed (it must straddle zero; zero offset is exact
    tracking).  For each sample a parameter is drawn uniformly and an offset
    is drawn by scaling one of the range endpoints toward zero, so widening
    the range can only move every sample outward: the resulting bound is
    monotone in the range width under a shared seed.  Initial speeds clamp
    at zero.  Simulation runs disturbance-free at ``dt_frs / substeps`` and
    deviations are recorded at every table time.

    Returns a parameter-uniform bound (elementwise max over samples).
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if isinstance(v0_range, Interval):
        off_lo, off_hi = v0_range.lo, v0_range.hi
    else:
        off_lo, off_hi = float(v0_range[0]), float(v0_range[1])
    if not (off_lo <= 0.0 <= off_hi):
        raise ValueError("v0_range must straddle zero (offsets from exact tracking)")
    t_grid = _time_grid(lim, dt_frs)
    n_t = t_grid.shape[0]
    dt = dt_frs / substeps

    rng = np.random.default_rng(seed)
    k = rng.uniform(-1.0, 1.0, size=(n_samples, 2))
    scale = rng.uniform(0.0, 1.0, size=n_samples)
    side = rng.uniform(0.0, 1.0, size=n_samples) < 0.5
    offsets = np.where(side, scale * off_hi, scale * off_lo)

    v_cruise = (k[:, 1] + 1.0) / 2.0 * lim.v_max
    w_cruise = k[:, 0] * lim.w_max
    v0 = np.maximum(0.0, v_cruise + offsets)
    ref = plan_positions(v_cruise, w_cruise, t_grid, lim.t_plan, lim.t_stop)
    dev = kernels.tracking_dev_batch(
        v0, v_cruise, w_cruise, dt, substeps, n_t,
        lim.t_plan, lim.t_stop, lim.k_a, lim.a_max, ref,
    )
    return TrackingErrorBound(t_grid=t_grid, values=dev.max(axis=0))


def inflate_frs(frs: FrsTable, g: TrackingErrorBound) -> FrsTable:
    """Widen every footprint by the tracking-error bound at its time index.

    Accepts parameter-uniform (T,) or per-cell (C, T) bounds; the input
    table is unchanged.  Inflations accumulate if applied repeatedly.
    """
    if g.t_grid.shape != frs.t_grid.shape or not np.allclose(
        g.t_grid, frs.t_grid, rtol=0, atol=1e-12
    ):
        raise ValueError("tracking bound time grid does not match the table")
    vals = g.values
    if vals.ndim == 1:
        extra = np.broadcast_to(vals, (frs.n_cells, vals.shape[0])).copy()
    elif vals.shape == (frs.n_cells, frs.t_grid.shape[0]):
        extra = vals.copy()
    else:
        raise ValueError("tracking bound shape does not match the table")
    if frs.inflation is not None:
        extra = extra + frs.inflation
    return FrsTable(
        k_values=frs.k_values,
        t_grid=frs.t_grid,
        centers=frs.centers,
        halfw_base=frs.halfw_base,
        robot_radius=frs.robot_radius,
        params_hash=frs.params_hash,
        inflation=extra,
    )


def project_unsafe_params(
    frs: FrsTable,
    obstacles,
    pose: PlanState,
    buffer: float = 0.0,
) -> np.ndarray:
    """Boolean mask over parameter cells: True where the cell is unsafe.

    A cell is unsafe when any of its footprints, posed into the world
    frame, comes within ``buffer`` of any obstacle at any time (at zero
    buffer: intersects, boundaries included).  The safe set is the
    complement.  Returns shape (n_cells,), reshapeable to (n_k, n_k).
    """
    polys, counts = kernels.pack_polygons(obstacles)
    return kernels.unsafe_mask(
        frs.centers, frs.halfw, pose.x, pose.y, pose.h, polys, counts, buffer
    )


def constraint_values(
    k: TrajParam,
    obstacles,
    pose: PlanState,
    frs: FrsTable,
    buffer: float = 0.0,
) -> np.ndarray:
    """Per-obstacle constraint values for one parameter.

    q_i = buffer - (min over time of the distance between the owning
    cell's posed footprint box and obstacle i).  Negative means the whole
    candidate tube keeps more than ``buffer`` clearance from obstacle i;
    signs at zero buffer agree exactly with project_unsafe_params.
    """
    polys, counts = kernels.pack_polygons(obstacles)
    cell = frs.cell_index(k.k1, k.k2)
    dists = kernels.cell_min_distances(
        frs.centers[cell], frs.halfw[cell], pose.x, pose.y, pose.h, polys, counts
    )
    return buffer - dists


# ------------------------------------------------------------------ caching


def save_frs(frs: FrsTable, path) -> None:
    """Write a table to disk in a deterministic binary layout."""
    header = struct.pack(
        "<64sqqdB",
        frs.params_hash.encode("ascii"),
        frs.n_k,
        frs.t_grid.shape[0],
        frs.robot_radius,
        frs.inflation is not None,
    )
    chunks = [
        _CACHE_MAGIC,
        header,
        np.ascontiguousarray(frs.k_values).tobytes(),
        np.ascontiguousarray(frs.t_grid).tobytes(),
        np.ascontiguousarray(frs.centers).tobytes(),
        np.ascontiguousarray(frs.halfw_base).tobytes(),
    ]
    if frs.inflation is not None:
        chunks.append(np.ascontiguousarray(frs.inflation).tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_frs(path) -> FrsTable:
    """Read a table written by save_frs."""
    raw = Path(path).read_bytes()
    if raw[: len(_CACHE_MAGIC)] != _CACHE_MAGIC:
        raise ValueError(f"{path}: not a reachable-set cache file")
    off = len(_CACHE_MAGIC)
    head_size = struct.calcsize("<64sqqdB")
    hash_b, n_k, n_t, robot_radius, has_inf = struct.unpack(
        "<64sqqdB", raw[off : off + head_size]
    )
    off += head_size

    def take(shape):
        nonlocal off
        count = int(np.prod(shape))
        arr = np.frombuffer(raw, dtype=np.float64, count=count, offset=off)
        off += count * 8
        return arr.reshape(shape).copy()

    k_values = take((n_k,))
    t_grid = take((n_t,))
    centers = take((n_k * n_k, n_t, 2))
    halfw_base = take((n_k * n_k, n_t))
    inflation = take((n_k * n_k, n_t)) if has_inf else None
    return FrsTable(
        k_values=k_values,
        t_grid=t_grid,
        centers=centers,
        halfw_base=halfw_base,
        robot_radius=robot_radius,
        params_hash=hash_b.decode("ascii"),
        inflation=inflation,
    )


def load_or_build(
    cache_dir,
    lim: VehicleLimits,
    n_k: int = 41,
    dt_frs: float = 0.025,
    robot_radius: float = 0.2,
):
    """Fetch a table from the cache directory, building and storing on miss.

    Cache files are keyed by a hash of the limits, grid resolution, time
    step, and robot radius.  Returns (table, was_built).
    """
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"frs_{_params_hash(lim, n_k, dt_frs, robot_radius)}.bin"
    if path.exists():
        return load_frs(path), False
    frs = build_frs(lim, n_k=n_k, dt_frs=dt_frs, robot_radius=robot_radius)
    save_frs(frs, path)
    return frs, True
