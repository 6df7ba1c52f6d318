"""Repair ladder for rejected candidates.

A candidate whose tube intersects an obstacle is not discarded outright;
three escalating corrections are tried in a fixed order, each re-verified:

1. speed backoff: scale the cruise speed down, same path shape;
2. lateral push: bias the turn-rate parameter against the estimated
   disturbance, stacked on the original and on each tried backoff level;
3. constraint tightening: grow the obstacle buffer and ask the planner
   for a fresh candidate.

The first trial that certifies safe wins.  A wall-clock budget bounds the
ladder (one in-flight trial may finish past it); running out of rungs or
time is an ordinary outcome that the caller answers with the fail-safe.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

from . import planner
from .dynamics import PlanState, TrajParam
from .verifier import Certificate


@dataclass(frozen=True)
class RepairConfig:
    """Rung parameters and the overall time budget."""

    speed_backoff_factors: Tuple[float, ...] = (0.8, 0.6, 0.4)
    lateral_push_steps: Tuple[float, ...] = (0.1, 0.2, 0.3)
    tighten_buffers: Tuple[float, ...] = (0.05, 0.10, 0.20)
    time_budget: float = 0.020

    def __post_init__(self):
        factors = tuple(float(f) for f in self.speed_backoff_factors)
        steps = tuple(float(s) for s in self.lateral_push_steps)
        buffers = tuple(float(b) for b in self.tighten_buffers)
        if not factors or not steps or not buffers:
            raise ValueError("every rung needs at least one level")
        if any(not 0.0 < f < 1.0 for f in factors):
            raise ValueError("backoff factors must lie strictly in (0, 1)")
        if list(factors) != sorted(factors, reverse=True):
            raise ValueError("backoff factors must descend")
        if any(s <= 0 for s in steps) or list(steps) != sorted(steps):
            raise ValueError("push steps must be positive and ascending")
        if any(b <= 0 for b in buffers) or list(buffers) != sorted(buffers):
            raise ValueError("tighten buffers must be positive and ascending")
        if not self.time_budget > 0:
            raise ValueError("time budget must be positive")
        object.__setattr__(self, "speed_backoff_factors", factors)
        object.__setattr__(self, "lateral_push_steps", steps)
        object.__setattr__(self, "tighten_buffers", buffers)
        object.__setattr__(self, "time_budget", float(self.time_budget))


@dataclass(frozen=True)
class RepairContext:
    """Everything a repair needs beyond the rejected candidate itself.

    ``verify`` maps a trajectory parameter to a certificate; the harness
    binds the measured state, disturbance measurement, and offset obstacles
    into it.  ``problem`` is the (non-inflated) planning problem used by
    the tightening rung's re-solve.  ``w_estimate`` is the harness's point
    estimate of the disturbance near the rejected collision.
    """

    problem: planner.PlanningProblem
    config: RepairConfig
    pose: PlanState
    w_estimate: Tuple[float, float]
    verify: Callable[[TrajParam], Certificate]


@dataclass(frozen=True)
class RepairOutcome:
    result: str  # "repaired" | "exhausted"
    k_safe: Optional[TrajParam]
    certificate: Optional[Certificate]
    attempts: Tuple[Tuple[str, Optional[TrajParam], str], ...]
    elapsed: float

    @property
    def repaired(self) -> bool:
        return self.result == "repaired"

    def __post_init__(self):
        if self.repaired and (
            self.certificate is None or not self.certificate.safe
        ):
            raise ValueError("repaired outcome requires a safe certificate")


def speed_backoff(k: TrajParam, factor: float) -> TrajParam:
    """Scale the cruise speed by ``factor``, leaving the turn rate alone.

    The speed parameter maps affinely to [0, v_max], so the scaling
    inverts to k2' = factor*(k2 + 1) - 1 independent of v_max; zero speed
    (k2 = -1) is a fixed point.
    """
    if not 0.0 < factor < 1.0:
        raise ValueError("backoff factor must lie strictly in (0, 1)")
    k2 = factor * (k.k2 + 1.0) - 1.0
    return TrajParam(k.k1, min(max(k2, -1.0), 1.0))


def lateral_push(
    k: TrajParam, w_estimate, pose: PlanState, step: float
) -> TrajParam:
    """Shift the turn-rate parameter against the lateral disturbance.

    The disturbance estimate is rotated into the body frame; a leftward
    (positive lateral) drift pushes k1 down (turn right) and vice versa.
    A purely longitudinal estimate leaves the candidate unchanged.
    """
    if step <= 0:
        raise ValueError("push step must be positive")
    wx, wy = float(w_estimate[0]), float(w_estimate[1])
    lateral = -math.sin(pose.h) * wx + math.cos(pose.h) * wy
    if lateral == 0.0:
        return k
    k1 = k.k1 - math.copysign(step, lateral)
    return TrajParam(min(max(k1, -1.0), 1.0), k.k2)


def repair(
    k_rejected: TrajParam, cert: Certificate, ctx: RepairContext
) -> RepairOutcome:
    """Walk the ladder until a trial certifies safe or options run out.

    Trials that would re-test an already-tried parameter (clamping, fixed
    points, repeated re-solve answers) are skipped without a verification
    call.  The budget is checked between trials.
    """
    if cert.safe:
        raise ValueError("repair expects an unsafe certificate")
    cfg = ctx.config
    start = time.perf_counter()
    attempts: List[Tuple[str, Optional[TrajParam], str]] = []
    tried = {(k_rejected.k1, k_rejected.k2)}

    def elapsed() -> float:
        return time.perf_counter() - start

    def finished(tag: str, k: TrajParam) -> Optional[RepairOutcome]:
        key = (k.k1, k.k2)
        if key in tried:
            return None
        tried.add(key)
        candidate_cert = ctx.verify(k)
        attempts.append((tag, k, candidate_cert.verdict))
        if candidate_cert.safe:
            return RepairOutcome(
                result="repaired",
                k_safe=k,
                certificate=candidate_cert,
                attempts=tuple(attempts),
                elapsed=elapsed(),
            )
        return None

    def exhausted() -> RepairOutcome:
        return RepairOutcome(
            result="exhausted",
            k_safe=None,
            certificate=None,
            attempts=tuple(attempts),
            elapsed=elapsed(),
        )

    backoff_bases: List[Tuple[str, TrajParam]] = [("none", k_rejected)]
    for factor in cfg.speed_backoff_factors:
        if elapsed() >= cfg.time_budget:
            return exhausted()
        k_b = speed_backoff(k_rejected, factor)
        backoff_bases.append((f"{factor:g}", k_b))
        done = finished(f"backoff:{factor:g}", k_b)
        if done:
            return done

    for base_tag, base_k in backoff_bases:
        for step in cfg.lateral_push_steps:
            if elapsed() >= cfg.time_budget:
                return exhausted()
            k_p = lateral_push(base_k, ctx.w_estimate, ctx.pose, step)
            done = finished(f"push:{base_tag}:{step:g}", k_p)
            if done:
                return done

    for buffer in cfg.tighten_buffers:
        if elapsed() >= cfg.time_budget:
            return exhausted()
        tightened = replace(
            ctx.problem, buffer=ctx.problem.buffer + buffer
        )
        outcome = planner.solve(tightened)
        if not outcome.feasible:
            attempts.append((f"tighten:{buffer:g}", None, "infeasible"))
            continue
        done = finished(f"tighten:{buffer:g}", outcome.k_star)
        if done:
            return done

    return exhausted()
