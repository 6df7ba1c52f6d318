"""Execution-time certification of a committed command profile.

The closed-loop vehicle field gets a natural interval inclusion; a mixed
monotone embedding system doubles the state into lower/upper bounds whose
componentwise face evaluations propagate a reachable tube with fixed-step
RK4.  Projecting the tube onto the plane gives per-time position boxes and
swept hulls between consecutive boxes; certification scans them against the
obstacle polygons and reports the earliest intersection.

Soundness caveat shared with the design it implements: RK4 discretizes the
true embedding flow, so containment is empirical (validated by Monte-Carlo
oracles in the tests) rather than rigorously rounded.  A per-step inflation
pad is exposed in the config for extra margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from . import kernels
from .dynamics import CommandProfile, UnicycleState
from .geometry import Interval, IntervalVector, interval_cos, interval_sin


class OrderViolation(RuntimeError):
    """Lower bound overtook upper during propagation.

    Signals a too-large verification step or an inclusion bug; the step
    index at which order broke is attached.
    """

    def __init__(self, step: int, time: float):
        super().__init__(
            f"embedding order violated at step {step} (t = {time:.6f} s)"
        )
        self.step = step
        self.time = time


@dataclass(frozen=True)
class EmbeddingState:
    """Componentwise lower/upper bounds on the vehicle state."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (4,) or hi.shape != (4,):
            raise ValueError("embedding state bounds must be 4-vectors")
        if np.any(lo > hi):
            raise ValueError("embedding state lower bound exceeds upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)


@dataclass(frozen=True)
class UncertaintyConfig:
    """Initial-state uncertainty and disturbance bounds for one tube.

    ``epsilon`` half-widths the measured state into the initial interval.
    ``w_lo``/``w_hi`` are either constant 2-vectors or per-time (M, 2)
    arrays valid around the matching ``w_times`` entries (nearest lookup).
    ``pad`` is an optional per-state, per-step additive inflation.
    """

    epsilon: Tuple[float, ...] = (0.02, 0.02, 0.01, 0.02)
    w_lo: object = (0.0, 0.0)
    w_hi: object = (0.0, 0.0)
    w_times: Optional[object] = None
    pad: Tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        eps = np.asarray(self.epsilon, dtype=float)
        pad = np.asarray(self.pad, dtype=float)
        if eps.shape != (4,) or np.any(eps < 0):
            raise ValueError("epsilon must be 4 nonnegative half-widths")
        if pad.shape != (4,) or np.any(pad < 0):
            raise ValueError("pad must be 4 nonnegative entries")
        w_lo = np.asarray(self.w_lo, dtype=float)
        w_hi = np.asarray(self.w_hi, dtype=float)
        if w_lo.shape != w_hi.shape:
            raise ValueError("disturbance bounds must share one shape")
        if w_lo.ndim == 2 and w_lo.shape[1] == 2:
            if self.w_times is None:
                raise ValueError("per-time disturbance bounds need w_times")
            times = np.asarray(self.w_times, dtype=float)
            if times.shape != (w_lo.shape[0],):
                raise ValueError("w_times length must match the bounds")
            object.__setattr__(self, "w_times", times)
        elif w_lo.shape != (2,):
            raise ValueError("disturbance bounds must be (2,) or (M, 2)")
        if np.any(w_lo > w_hi):
            raise ValueError("disturbance lower bound exceeds upper bound")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "pad", pad)
        object.__setattr__(self, "w_lo", w_lo)
        object.__setattr__(self, "w_hi", w_hi)

    def bounds_at_nodes(self, times: np.ndarray):
        """Disturbance bounds at each tube node time: (N+1, 2) lo and hi."""
        n = times.shape[0]
        if self.w_lo.ndim == 1:
            return (
                np.broadcast_to(self.w_lo, (n, 2)).copy(),
                np.broadcast_to(self.w_hi, (n, 2)).copy(),
            )
        idx = np.abs(times[:, None] - self.w_times[None, :]).argmin(axis=1)
        return self.w_lo[idx].copy(), self.w_hi[idx].copy()


@dataclass(frozen=True)
class ReachTube:
    """Time-indexed state bounds plus their planar projections."""

    times: np.ndarray       # (N+1,)
    lower: np.ndarray       # (N+1, 4)
    upper: np.ndarray       # (N+1, 4)
    hull_lo: np.ndarray = field(init=False)  # (N, 2)
    hull_hi: np.ndarray = field(init=False)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        lower = np.ascontiguousarray(self.lower, dtype=float)
        upper = np.ascontiguousarray(self.upper, dtype=float)
        n = times.shape[0]
        if times.ndim != 1 or lower.shape != (n, 4) or upper.shape != (n, 4):
            raise ValueError("tube needs times (N,), bounds (N, 4)")
        if np.any(lower > upper):
            raise ValueError("tube lower bounds exceed upper bounds")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        b_lo, b_hi = lower[:, :2], upper[:, :2]
        object.__setattr__(self, "hull_lo", np.minimum(b_lo[:-1], b_lo[1:]))
        object.__setattr__(self, "hull_hi", np.maximum(b_hi[:-1], b_hi[1:]))
        for arr in (self.times, self.lower, self.upper, self.hull_lo, self.hull_hi):
            arr.setflags(write=False)

    def __len__(self):
        return self.times.shape[0]

    @property
    def position_lo(self) -> np.ndarray:
        return self.lower[:, :2]

    @property
    def position_hi(self) -> np.ndarray:
        return self.upper[:, :2]

    def state(self, j: int) -> EmbeddingState:
        return EmbeddingState(self.lower[j].copy(), self.upper[j].copy())

    def position_box(self, j: int) -> IntervalVector:
        return IntervalVector(self.lower[j, :2], self.upper[j, :2])

    def swept_hull(self, j: int) -> IntervalVector:
        return IntervalVector(self.hull_lo[j], self.hull_hi[j])

    def widths(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class Certificate:
    """Verdict of a tube/obstacle scan."""

    verdict: str  # "safe" | "unsafe"
    first_collision: Optional[Tuple[int, int]]  # (time index, obstacle index)
    tube: ReachTube
    via_hull: bool = False  # unsafe found on a swept hull, not a sample box

    @property
    def safe(self) -> bool:
        return self.verdict == "safe"


def _clamp_interval(lo: float, hi: float, bound: float) -> Interval:
    return Interval(
        min(max(lo, -bound), bound),
        min(max(hi, -bound), bound),
    )


def inclusion_field(
    x_iv: IntervalVector,
    t: float,
    profile: CommandProfile,
    w_iv: IntervalVector,
) -> IntervalVector:
    """Natural interval inclusion of the closed-loop field.

    Sound for every state in x_iv and disturbance in w_iv: position rates
    bound the speed/heading product plus disturbance, the heading rate is
    the (known) commanded turn rate, and the speed rate is the clamped
    proportional law evaluated as a monotone interval map.
    """
    h = Interval(float(x_iv.lo[2]), float(x_iv.hi[2]))
    v = Interval(float(x_iv.lo[3]), float(x_iv.hi[3]))
    c, s = interval_cos(h), interval_sin(h)
    prods_c = (v.lo * c.lo, v.lo * c.hi, v.hi * c.lo, v.hi * c.hi)
    prods_s = (v.lo * s.lo, v.lo * s.hi, v.hi * s.lo, v.hi * s.hi)
    vd, wd = profile.v_des(t), profile.w_des(t)
    accel = _clamp_interval(
        profile.k_a * (vd - v.hi), profile.k_a * (vd - v.lo), profile.a_max
    )
    lo = np.array([
        min(prods_c) + float(w_iv.lo[0]),
        min(prods_s) + float(w_iv.lo[1]),
        wd,
        accel.lo,
    ])
    hi = np.array([
        max(prods_c) + float(w_iv.hi[0]),
        max(prods_s) + float(w_iv.hi[1]),
        wd,
        accel.hi,
    ])
    return IntervalVector(lo, hi)


def embedding_field(
    e: EmbeddingState,
    t: float,
    profile: CommandProfile,
    w_iv: IntervalVector,
) -> Tuple[np.ndarray, np.ndarray]:
    """Mixed-monotone embedding derivative: (lower rates, upper rates).

    Component i of the lower derivative evaluates the inclusion lower bound
    on the face interval with component i pinched at its lower bound (the
    upper half symmetric).  The position components are independent of
    position, so their faces are the full interval; the speed faces reduce
    to point evaluations of the proportional law.
    """
    d = kernels.emb_deriv(
        e.lower[0], e.lower[1], e.lower[2], e.lower[3],
        e.upper[0], e.upper[1], e.upper[2], e.upper[3],
        t, *profile.kernel_args(),
        float(w_iv.lo[0]), float(w_iv.lo[1]),
        float(w_iv.hi[0]), float(w_iv.hi[1]),
    )
    return np.array(d[:4]), np.array(d[4:])


def propagate_tube(
    x_hat: UnicycleState,
    cfg: UncertaintyConfig,
    profile: CommandProfile,
    dt_v: float = 0.01,
) -> ReachTube:
    """Integrate the embedding system over the whole profile horizon.

    The initial interval is the measured state half-widened by epsilon.
    Each step uses the hull of the disturbance bounds at its two node times
    (covering mid-step transitions between measurement slots) and inflates
    by the configured pad.  Raises OrderViolation if the bounds cross.
    """
    if dt_v <= 0:
        raise ValueError("dt_v must be positive")
    horizon = profile.horizon
    n = int(round(horizon / dt_v))
    if abs(n * dt_v - horizon) > 1e-9:
        raise ValueError("dt_v must divide the profile horizon")
    times = np.arange(n + 1) * dt_v
    node_lo, node_hi = cfg.bounds_at_nodes(times)
    step_lo = np.minimum(node_lo[:-1], node_lo[1:])
    step_hi = np.maximum(node_hi[:-1], node_hi[1:])
    x0 = x_hat.as_array()
    lower, upper, fail = kernels.tube_rk4(
        x0 - cfg.epsilon, x0 + cfg.epsilon, 0.0, dt_v, n,
        *profile.kernel_args(), step_lo, step_hi, np.asarray(cfg.pad),
    )
    if fail >= 0:
        raise OrderViolation(int(fail), float(fail * dt_v))
    return ReachTube(times=times, lower=lower, upper=upper)


def certify(tube: ReachTube, obstacles) -> Certificate:
    """Scan position boxes and swept hulls against the obstacles.

    Safe only when nothing intersects; otherwise the earliest time index
    wins, ties at one index resolving to the lowest obstacle index (box
    contact reported in preference to hull contact for the same pair).
    """
    polys, counts = kernels.pack_polygons(obstacles)
    j, o, kind = kernels.first_hit(
        np.ascontiguousarray(tube.position_lo),
        np.ascontiguousarray(tube.position_hi),
        polys, counts,
    )
    if j < 0:
        return Certificate(verdict="safe", first_collision=None, tube=tube)
    return Certificate(
        verdict="unsafe",
        first_collision=(int(j), int(o)),
        tube=tube,
        via_hull=bool(kind == 1),
    )
