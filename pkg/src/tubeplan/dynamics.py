"""Vehicle models, command profiles, and disturbance fields.

Two models share one state space projection:

* a high-fidelity unicycle (x, y, h, v) driven by commanded speed and turn
  rate through a saturated proportional speed law, plus an additive planar
  disturbance, and
* a Dubins planning model (x, y, h) that follows the commands exactly.

A trajectory parameter ``k = (k1, k2)`` in the unit square maps affinely to
cruise commands; every profile holds the cruise values for ``t_plan`` seconds
and then ramps both commands linearly to zero over ``t_stop`` seconds.  The
Dubins flow of such a profile has a closed form: both commands scale by the
same ramp factor, so the fail-safe phase is the cruise arc traversed at a
reparameterized rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .geometry import ConvexPolygon


@dataclass(frozen=True)
class UnicycleState:
    """High-fidelity vehicle state: planar pose plus forward speed."""

    x: float
    y: float
    h: float
    v: float

    def __post_init__(self):
        for name in ("x", "y", "h", "v"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite state component {name}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.h, self.v], dtype=float)

    @staticmethod
    def from_array(a) -> "UnicycleState":
        return UnicycleState(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @property
    def pose(self) -> "PlanState":
        return PlanState(self.x, self.y, self.h)


@dataclass(frozen=True)
class PlanState:
    """Planning-model state: planar pose only."""

    x: float
    y: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "h"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite pose component {name}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.h], dtype=float)


@dataclass(frozen=True)
class TrajParam:
    """Dimensionless trajectory parameter in the unit square [-1,1]^2.

    ``k1`` selects the cruise turn rate, ``k2`` the cruise speed.
    """

    k1: float
    k2: float

    def __post_init__(self):
        tol = 1e-12
        for name in ("k1", "k2"):
            val = getattr(self, name)
            if not math.isfinite(val) or abs(val) > 1.0 + tol:
                raise ValueError(f"{name}={val!r} outside [-1, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.k1, self.k2], dtype=float)


@dataclass(frozen=True)
class VehicleLimits:
    """Actuation limits, tracking-law constants, and phase durations."""

    v_max: float = 2.0
    w_max: float = 1.0
    a_max: float = 2.0
    k_a: float = 4.0
    t_plan: float = 1.5
    t_stop: float = 1.0

    def __post_init__(self):
        for name in ("v_max", "w_max", "a_max", "k_a", "t_plan", "t_stop"):
            val = getattr(self, name)
            if not (math.isfinite(val) and val > 0.0):
                raise ValueError(f"limit {name}={val!r} must be positive")

    @property
    def horizon(self) -> float:
        """Total profile duration: cruise plus fail-safe ramp."""
        return self.t_plan + self.t_stop


@dataclass(frozen=True)
class CommandProfile:
    """Commanded (speed, turn rate) as a function of time.

    Constant ``(v_cruise, w_cruise)`` on [0, t_plan], then both ramp linearly
    to zero over [t_plan, t_plan + t_stop]; zero afterwards.  Carries the
    tracking-law constants so the closed-loop field is fully determined by
    (profile, state, time, disturbance).
    """

    v_cruise: float
    w_cruise: float
    t_plan: float
    t_stop: float
    k_a: float
    a_max: float
    k: TrajParam

    @property
    def horizon(self) -> float:
        return self.t_plan + self.t_stop

    def _ramp(self, t: float) -> float:
        if t <= self.t_plan:
            return 1.0
        return max(0.0, 1.0 - (t - self.t_plan) / self.t_stop)

    def v_des(self, t: float) -> float:
        return self.v_cruise * self._ramp(t)

    def w_des(self, t: float) -> float:
        return self.w_cruise * self._ramp(t)

    def kernel_args(self):
        """Positional argument pack shared by every numeric kernel."""
        return (self.v_cruise, self.w_cruise, self.t_plan, self.t_stop,
                self.k_a, self.a_max)


@dataclass(frozen=True)
class DisturbancePatch:
    """A convex workspace region with componentwise disturbance bounds."""

    region: ConvexPolygon
    w_lo: tuple
    w_hi: tuple

    def __post_init__(self):
        lo = np.asarray(self.w_lo, dtype=float)
        hi = np.asarray(self.w_hi, dtype=float)
        if lo.shape != (2,) or hi.shape != (2,):
            raise ValueError("disturbance bounds must be 2-vectors")
        if not np.all(lo <= hi):
            raise ValueError("disturbance lower bound exceeds upper bound")
        object.__setattr__(self, "w_lo", (float(lo[0]), float(lo[1])))
        object.__setattr__(self, "w_hi", (float(hi[0]), float(hi[1])))


class PatchSet:
    """Disturbance patches packed into flat arrays for the kernels."""

    def __init__(self, patches: Sequence[DisturbancePatch]):
        self.patches = tuple(patches)
        self.regions, self.counts = kernels.pack_polygons(
            [p.region for p in self.patches]
        )
        if self.patches:
            self.w_lo = np.array([p.w_lo for p in self.patches], dtype=float)
            self.w_hi = np.array([p.w_hi for p in self.patches], dtype=float)
        else:
            self.w_lo = np.zeros((0, 2))
            self.w_hi = np.zeros((0, 2))

    def __len__(self):
        return len(self.patches)

    def bounds_at(self, x: float, y: float):
        """Componentwise hull of bounds over patches containing (x, y).

        Returns (lo, hi, found); (0, 0) bounds with found=False outside all
        patches.
        """
        xl, yl, xu, yu, found = kernels.patch_bounds_at(
            float(x), float(y), self.regions, self.counts, self.w_lo, self.w_hi
        )
        return np.array([xl, yl]), np.array([xu, yu]), bool(found)


def _as_patch_set(patches) -> PatchSet:
    if isinstance(patches, PatchSet):
        return patches
    return PatchSet(patches)


def param_to_commands(k: TrajParam, lim: VehicleLimits) -> CommandProfile:
    """Map a trajectory parameter to its command profile.

    k1 spans turn rates [-w_max, w_max]; k2 spans speeds [0, v_max].
    """
    return CommandProfile(
        v_cruise=(k.k2 + 1.0) / 2.0 * lim.v_max,
        w_cruise=k.k1 * lim.w_max,
        t_plan=lim.t_plan,
        t_stop=lim.t_stop,
        k_a=lim.k_a,
        a_max=lim.a_max,
        k=k,
    )


def _arc_distance(profile: CommandProfile, t: float) -> float:
    """Progress along the cruise arc after t seconds of the profile.

    The fail-safe ramp scales both commands by the same factor, so the path
    is the cruise arc traversed at rate ramp(t); integrating the ramp gives
    the equivalent cruise duration.
    """
    s = min(t, profile.t_plan)
    tau = min(max(t - profile.t_plan, 0.0), profile.t_stop)
    if tau > 0.0:
        s += tau - tau * tau / (2.0 * profile.t_stop)
    return s


def _advance_arc(x: float, y: float, h: float, v: float, w: float, s: float):
    """Exact Dubins advance by arc-time s at constant commands (v, w)."""
    phi = w * s
    half = 0.5 * phi
    # v*s*sinc(phi/2) is the chord length; exact and smooth through w = 0
    chord = v * s * float(np.sinc(half / math.pi))
    return (
        x + chord * math.cos(h + half),
        y + chord * math.sin(h + half),
        h + phi,
    )


def plan_flow(z0: PlanState, profile: CommandProfile, t: float) -> PlanState:
    """Closed-form flow of the planning model from z0 for t seconds.

    Valid on [0, horizon]; the fail-safe segment reduces to the cruise arc
    under the arc-time substitution, so no numerical integration is needed.
    """
    if not (-1e-12 <= t <= profile.horizon + 1e-9):
        raise ValueError(
            f"t={t!r} outside the profile horizon [0, {profile.horizon}]"
        )
    s = _arc_distance(profile, max(t, 0.0))
    x, y, h = _advance_arc(z0.x, z0.y, z0.h, profile.v_cruise, profile.w_cruise, s)
    return PlanState(x, y, h)


def plan_positions(v_cruise, w_cruise, times, t_plan: float, t_stop: float) -> np.ndarray:
    """Vectorized body-frame plan positions for batches of cruise commands.

    Flows the planning model from the origin pose for every command pair in
    ``v_cruise``/``w_cruise`` (shape (B,)) at every time in ``times`` (shape
    (T,), each within [0, t_plan + t_stop]).  Returns positions (B, T, 2).
    """
    vc = np.atleast_1d(np.asarray(v_cruise, dtype=float))
    wc = np.atleast_1d(np.asarray(w_cruise, dtype=float))
    ts = np.asarray(times, dtype=float)
    if ts.min(initial=0.0) < -1e-12 or ts.max(initial=0.0) > t_plan + t_stop + 1e-9:
        raise ValueError("plan times outside the profile horizon")
    tau = np.clip(ts - t_plan, 0.0, t_stop)
    s = np.minimum(ts, t_plan) + tau - tau * tau / (2.0 * t_stop)
    phi = wc[:, None] * s[None, :]
    half = 0.5 * phi
    chord = vc[:, None] * s[None, :] * np.sinc(half / math.pi)
    out = np.empty((vc.shape[0], ts.shape[0], 2))
    out[:, :, 0] = chord * np.cos(half)
    out[:, :, 1] = chord * np.sin(half)
    return out


def closed_loop_field(x: UnicycleState, t: float, profile: CommandProfile, w) -> np.ndarray:
    """Derivative of the high-fidelity state under the tracking law.

    Position rates are v along the heading plus the disturbance; the heading
    follows the commanded turn rate open loop; speed follows a proportional
    law clamped to the acceleration limit.  This single field is shared by
    the simulator and (through its inclusion) the verifier.
    """
    d = kernels.field(
        x.h, x.v, t, *profile.kernel_args(), float(w[0]), float(w[1])
    )
    return np.array(d)


def sample_disturbance(patches, x: float, y: float, rng, mode: str = "random"):
    """Realize a disturbance at a position from the active patch bounds.

    ``random`` draws uniformly from the componentwise hull of the bounds of
    every patch containing the point; ``corner`` picks, per component, the
    bound endpoint of largest magnitude (ties toward the upper bound).
    Returns (0, 0) outside all patches.
    """
    ps = _as_patch_set(patches)
    lo, hi, found = ps.bounds_at(x, y)
    if not found:
        return 0.0, 0.0
    if mode == "random":
        if rng is None:
            raise ValueError("random disturbance realization requires an rng")
        draw = rng.uniform(lo, hi)
        return float(draw[0]), float(draw[1])
    if mode == "corner":
        wx = lo[0] if -lo[0] > hi[0] else hi[0]
        wy = lo[1] if -lo[1] > hi[1] else hi[1]
        return float(wx), float(wy)
    raise ValueError(f"unknown disturbance realization mode {mode!r}")


def hifi_step(
    x: UnicycleState,
    t: float,
    dt: float,
    profile: CommandProfile,
    patches,
    rng=None,
    mode: str = "random",
) -> UnicycleState:
    """One RK4 step of the closed loop with a realized disturbance.

    The disturbance is sampled once at the current position and held
    constant across the step.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    wx, wy = sample_disturbance(patches, x.x, x.y, rng, mode)
    nx, ny, nh, nv = kernels.rk4_step(
        x.x, x.y, x.h, x.v, t, dt, *profile.kernel_args(), wx, wy
    )
    return UnicycleState(nx, ny, nh, nv)
