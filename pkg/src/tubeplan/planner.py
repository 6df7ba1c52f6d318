"""Online trajectory-parameter optimization over the reachable-set table.

Solving is a two-stage sweep over the 2-D compact parameter space: mask the
grid cells whose footprints reach an obstacle (plus buffer), take the
admissible safe cell whose cruise endpoint lands closest to the goal, then
polish the parameter inside that cell with a bounded coordinate descent.
Infeasibility (no safe admissible cell) is an outcome, not an error.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .dynamics import (
    PlanState,
    TrajParam,
    VehicleLimits,
    param_to_commands,
    plan_flow,
)
from .frs import FrsTable
from .geometry import IntervalVector

FULL_PARAM_BOX = IntervalVector([-1.0, -1.0], [1.0, 1.0])


@dataclass(frozen=True)
class PlanningProblem:
    """One planning query: where we are, where to go, what is in the way."""

    pose: PlanState
    goal: tuple
    obstacles: tuple
    frs: FrsTable
    limits: VehicleLimits
    k_adm: IntervalVector = FULL_PARAM_BOX
    buffer: float = 0.0

    def __post_init__(self):
        goal = (float(self.goal[0]), float(self.goal[1]))
        object.__setattr__(self, "goal", goal)
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.buffer < 0:
            raise ValueError("buffer must be nonnegative")
        ka = self.k_adm
        if ka.lo.shape != (2,):
            raise ValueError("k_adm must be a 2-D interval box")
        if ka.lo.min() < -1.0 - 1e-12 or ka.hi.max() > 1.0 + 1e-12:
            raise ValueError("k_adm must lie within the unit parameter square")


@dataclass(frozen=True)
class PlanOutcome:
    """Result of one solve: the chosen parameter or an infeasible marker."""

    k_star: Optional[TrajParam]
    cost: float
    evaluations: int
    solve_time: float
    cell: int = -1

    @property
    def feasible(self) -> bool:
        return self.k_star is not None


def objective(k: TrajParam, problem: PlanningProblem) -> float:
    """Squared distance from the cruise-phase endpoint to the goal."""
    profile = param_to_commands(k, problem.limits)
    z = plan_flow(problem.pose, profile, problem.limits.t_plan)
    return (z.x - problem.goal[0]) ** 2 + (z.y - problem.goal[1]) ** 2


def _grid_costs(problem: PlanningProblem) -> np.ndarray:
    """Objective at every grid cell's parameter, vectorized. (C,)."""
    frs, lim, pose = problem.frs, problem.limits, problem.pose
    g = frs.k_values
    k1 = np.repeat(g, frs.n_k)
    k2 = np.tile(g, frs.n_k)
    v_c = (k2 + 1.0) / 2.0 * lim.v_max
    w_c = k1 * lim.w_max
    # cruise endpoint in the body frame, exactly as plan_flow computes it
    phi = w_c * lim.t_plan
    half = 0.5 * phi
    chord = v_c * lim.t_plan * np.sinc(half / math.pi)
    bx = chord * np.cos(half)
    by = chord * np.sin(half)
    ch, sh = math.cos(pose.h), math.sin(pose.h)
    ex = pose.x + ch * bx - sh * by
    ey = pose.y + sh * bx + ch * by
    return (ex - problem.goal[0]) ** 2 + (ey - problem.goal[1]) ** 2


def _admissible_cells(problem: PlanningProblem) -> np.ndarray:
    """Cells whose grid parameter lies inside k_adm. (C,) bool."""
    g = problem.frs.k_values
    lo, hi = problem.k_adm.lo, problem.k_adm.hi
    tol = 1e-12
    ok1 = (g >= lo[0] - tol) & (g <= hi[0] + tol)
    ok2 = (g >= lo[1] - tol) & (g <= hi[1] + tol)
    return (ok1[:, None] & ok2[None, :]).reshape(-1)


def solve(problem: PlanningProblem) -> PlanOutcome:
    """Pick the admissible safe parameter minimizing the goal objective.

    Stage 1 masks unsafe cells through the reachable-set table (exact cell
    distances, shared with constraint evaluation).  Stage 2 takes the
    cheapest safe admissible cell, first grid index winning ties.  Stage 3
    polishes within the winning cell by coordinate descent, capped at 25
    objective evaluations; constraints are cellwise constant, so trial
    points clipped to the cell stay feasible by construction (re-asserted
    before returning).
    """
    t_start = time.perf_counter()
    frs, pose = problem.frs, problem.pose
    polys, counts = kernels.pack_polygons(problem.obstacles)
    unsafe = kernels.unsafe_mask(
        frs.centers, frs.halfw, pose.x, pose.y, pose.h, polys, counts,
        problem.buffer,
    )
    candidates = _admissible_cells(problem) & ~unsafe
    n_candidates = int(candidates.sum())
    if n_candidates == 0:
        return PlanOutcome(
            k_star=None,
            cost=math.inf,
            evaluations=0,
            solve_time=time.perf_counter() - t_start,
        )

    costs = _grid_costs(problem)
    costs[~candidates] = math.inf
    cell = int(np.argmin(costs))
    evaluations = n_candidates

    # coordinate descent inside the winning cell, clipped to k_adm; the box
    # shrinks by a sliver so trial points on the shared cell boundary cannot
    # round into the (unchecked) neighboring cell
    lo, hi = frs.cell_box(cell)
    lo = np.maximum(lo, problem.k_adm.lo)
    hi = np.minimum(hi, problem.k_adm.hi)
    margin = 1e-6 * frs.delta
    lo, hi = lo + margin, hi - margin
    squeeze = lo > hi
    lo[squeeze] = hi[squeeze] = (lo[squeeze] + hi[squeeze]) / 2.0
    kc = frs.cell_param(cell)
    x = np.clip([kc.k1, kc.k2], lo, hi)
    best = objective(TrajParam(x[0], x[1]), problem)
    evaluations += 1
    budget = 25
    used = 1
    step = (hi - lo) / 2.0
    while used < budget and step.max() > 1e-4:
        improved = False
        for axis in (0, 1):
            for sign in (1.0, -1.0):
                if used >= budget:
                    break
                trial = x.copy()
                trial[axis] = min(max(trial[axis] + sign * step[axis], lo[axis]), hi[axis])
                if trial[axis] == x[axis]:
                    continue
                f = objective(TrajParam(trial[0], trial[1]), problem)
                used += 1
                evaluations += 1
                if f < best:
                    x, best = trial, f
                    improved = True
        if not improved:
            step *= 0.5

    k_star = TrajParam(float(x[0]), float(x[1]))
    if problem.obstacles:
        dists = kernels.cell_min_distances(
            frs.centers[cell], frs.halfw[cell], pose.x, pose.y, pose.h,
            polys, counts,
        )
        if problem.buffer - dists.min() >= 0.0:
            raise RuntimeError(
                "solver returned a parameter violating its own constraints"
            )
    return PlanOutcome(
        k_star=k_star,
        cost=float(best),
        evaluations=evaluations,
        solve_time=time.perf_counter() - t_start,
        cell=cell,
    )
