"""Receding-horizon simulation of the full planning stack.

One run alternates decision cycles with simulated execution.  Each cycle
builds the planning constraints, solves for a candidate, and (in certified
mode) measures disturbance bounds along it, propagates a reachable tube,
and certifies or repairs it.  The winning profile's cruise phase is then
executed step by step against realized disturbances; infeasibility or a
failed repair triggers the committed fail-safe instead.  Termination:
goal disk entry, simulated collision, fail-safe stop, or the cycle cap.

Two planning modes share the loop.  ``standard_rtd`` plans against the
tracking-error-inflated footprint table and executes its answer unchecked;
``rtd_rax`` plans against the lean table and gates execution behind the
tube certificate.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import kernels, planner
from .dynamics import (
    CommandProfile,
    DisturbancePatch,
    PatchSet,
    PlanState,
    TrajParam,
    UnicycleState,
    VehicleLimits,
    param_to_commands,
    sample_disturbance,
)
from .frs import (
    FrsTable,
    TrackingErrorBound,
    build_frs,
    estimate_tracking_error,
    inflate_frs,
    load_or_build,
)
from .geometry import (
    ConvexPolygon,
    IntervalVector,
    offset_polygon,
    point_polygon_clearance,
)
from .planner import FULL_PARAM_BOX, PlanOutcome, PlanningProblem
from .repair import RepairConfig, RepairContext, RepairOutcome, repair
from .verifier import Certificate, UncertaintyConfig, certify, propagate_tube

TRACE_SCHEMA = "tubeplan-trace/1"

MODES = ("standard_rtd", "rtd_rax")
REALIZATIONS = ("random", "corner")

STAGE_KEYS = (
    "constraint_setup",
    "rtd_solve",
    "reference_rollout",
    "verify",
    "repair_loop",
    "total",
)

BENCH_ROWS = (
    ("constraint setup", "constraint_setup"),
    ("RTD solve", "rtd_solve"),
    ("reference rollout", "reference_rollout"),
    ("verify", "verify"),
    ("repair loop", "repair_loop"),
    ("total cycle", "total"),
)


@dataclass(frozen=True)
class Scenario:
    """A complete, reproducible experiment description."""

    name: str
    start: UnicycleState
    goal: Tuple[float, float]
    goal_radius: float
    obstacles: Tuple[ConvexPolygon, ...] = ()
    patches: Tuple[DisturbancePatch, ...] = ()
    limits: VehicleLimits = VehicleLimits()
    uncertainty: UncertaintyConfig = UncertaintyConfig()
    repair_config: RepairConfig = RepairConfig()
    mode: str = "rtd_rax"
    replan_period: Optional[float] = None  # default: the cruise duration
    max_cycles: int = 30
    seed: int = 0
    robot_radius: float = 0.2
    n_k: int = 41
    dt_frs: float = 0.025
    dt_v: float = 0.01
    dt_sim: float = 0.01
    buffer: float = 0.0
    k_adm: IntervalVector = FULL_PARAM_BOX
    v0_offset_range: Tuple[float, float] = (-0.5, 0.2)
    tracking_samples: int = 200
    tracking_seed: int = 0
    realization: str = "random"

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.realization not in REALIZATIONS:
            raise ValueError(f"realization must be one of {REALIZATIONS}")
        if not self.goal_radius > 0:
            raise ValueError("goal radius must be positive")
        if self.max_cycles < 1:
            raise ValueError("max_cycles must be at least 1")
        if self.replan_period is None:
            object.__setattr__(self, "replan_period", self.limits.t_plan)
        if not 0 < self.replan_period <= self.limits.t_plan + 1e-12:
            raise ValueError("replan period must lie in (0, t_plan]")
        steps = self.replan_period / self.dt_sim
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("replan period must be a multiple of dt_sim")
        if self.uncertainty.w_lo.ndim != 1 or np.any(self.uncertainty.w_lo) \
                or np.any(self.uncertainty.w_hi):
            raise ValueError(
                "scenario uncertainty carries epsilon/pad only; disturbance "
                "bounds are measured per cycle"
            )
        object.__setattr__(self, "goal", tuple(map(float, self.goal)))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "patches", tuple(self.patches))


@dataclass(frozen=True)
class PreparedTables:
    """Offline products shared by every run of one scenario."""

    base: FrsTable
    inflated: FrsTable
    tracking: TrackingErrorBound


@dataclass(frozen=True)
class CycleRecord:
    """Everything one decision cycle did, plus its stage timings."""

    index: int
    state: UnicycleState
    plan: PlanOutcome
    certificate: Optional[Certificate]
    repair_outcome: Optional[RepairOutcome]
    action: str  # "execute" | "failsafe"
    k_executed: Optional[TrajParam]
    timings: dict

    @property
    def accepted_certificate(self) -> Optional[Certificate]:
        """Certificate of the profile that was actually executed."""
        if self.repair_outcome is not None and self.repair_outcome.repaired:
            return self.repair_outcome.certificate
        if self.certificate is not None and self.certificate.safe:
            return self.certificate
        return None


@dataclass(frozen=True)
class RunResult:
    outcome: str  # reached_goal | collided | failsafe_stop | max_cycles
    detail: dict
    times: np.ndarray
    states: np.ndarray  # (N, 4) simulated trajectory
    cycles: Tuple[CycleRecord, ...]
    path_length: float
    measured_violations: int
    scenario: Scenario

    @property
    def reached_goal(self) -> bool:
        return self.outcome == "reached_goal"


def prepare_tables(scenario: Scenario, cache_dir=None) -> PreparedTables:
    """Build (or fetch) the footprint table and its inflated twin."""
    if cache_dir is not None:
        base, _ = load_or_build(
            cache_dir, scenario.limits, n_k=scenario.n_k,
            dt_frs=scenario.dt_frs, robot_radius=scenario.robot_radius,
        )
    else:
        base = build_frs(
            scenario.limits, n_k=scenario.n_k, dt_frs=scenario.dt_frs,
            robot_radius=scenario.robot_radius,
        )
    tracking = estimate_tracking_error(
        scenario.limits, scenario.tracking_samples, scenario.v0_offset_range,
        scenario.tracking_seed, dt_frs=scenario.dt_frs,
    )
    return PreparedTables(
        base=base, inflated=inflate_frs(base, tracking), tracking=tracking
    )


def measure_disturbance(
    profile: CommandProfile,
    pose: PlanState,
    patches,
    frs: FrsTable,
):
    """Disturbance bounds along a candidate, per footprint time index.

    For each index, the interval hull of the bounds of every patch that
    intersects the candidate's (non-inflated) posed footprint box; the zero
    interval where no patch intersects.  Returns (lo, hi), each (T, 2).
    """
    ps = patches if isinstance(patches, PatchSet) else PatchSet(patches)
    cell = frs.cell_index(profile.k.k1, profile.k.k2)
    track_lo, track_hi = frs.footprint_track(cell, pose)
    return kernels.measured_bounds(
        track_lo, track_hi, ps.regions, ps.counts, ps.w_lo, ps.w_hi
    )


def _zero_profile(limits: VehicleLimits) -> CommandProfile:
    """Brake-in-place command: zero speed and turn rate from the start."""
    return param_to_commands(TrajParam(0.0, -1.0), limits)


def run(scenario: Scenario, tables: Optional[PreparedTables] = None,
        cache_dir=None) -> RunResult:
    """Simulate one seeded scenario to termination."""
    if tables is None:
        tables = prepare_tables(scenario, cache_dir)
    lim = scenario.limits
    rax = scenario.mode == "rtd_rax"
    frs_plan = tables.base if rax else tables.inflated
    ps = PatchSet(scenario.patches)
    cert_obstacles = tuple(
        offset_polygon(o, scenario.robot_radius) for o in scenario.obstacles
    )
    rng = np.random.default_rng(scenario.seed)
    goal = np.asarray(scenario.goal)
    dt = scenario.dt_sim

    state = scenario.start
    t_sim = 0.0
    times = [0.0]
    states = [state.as_array()]
    cycles = []
    violations = 0
    outcome: Optional[str] = None
    detail: dict = {}
    committed: Optional[CommandProfile] = None
    committed_tau = 0.0

    def at_goal(s: UnicycleState) -> bool:
        return math.hypot(s.x - goal[0], s.y - goal[1]) <= scenario.goal_radius

    def hit_obstacle(s: UnicycleState) -> int:
        for i, poly in enumerate(scenario.obstacles):
            d = point_polygon_clearance((s.x, s.y), poly)
            if d <= scenario.robot_radius:
                return i
        return -1

    def simulate(profile, tau0, n_steps, measured=None, until_rest=False):
        """Advance the closed loop; returns a terminal outcome or None.

        ``measured`` (lo, hi arrays on the footprint grid) enables the
        realized-within-measured diagnostic.  ``until_rest`` keeps stepping
        past ``n_steps`` (same profile, commands already zero) until the
        speed drops to rest, for fail-safe execution.
        """
        nonlocal state, t_sim, violations
        step = 0
        rest_cap = int(round(10.0 / dt))
        while True:
            if step >= n_steps:
                if not until_rest or state.v <= 1e-3 or step >= rest_cap:
                    return None
            tau = tau0 + step * dt
            w = sample_disturbance(
                ps, state.x, state.y, rng, scenario.realization
            )
            if measured is not None:
                j = min(
                    int(round(tau / scenario.dt_frs)),
                    measured[0].shape[0] - 1,
                )
                lo_j, hi_j = measured[0][j], measured[1][j]
                if (w[0] < lo_j[0] - 1e-12 or w[0] > hi_j[0] + 1e-12
                        or w[1] < lo_j[1] - 1e-12 or w[1] > hi_j[1] + 1e-12):
                    violations += 1
            nxt = kernels.rk4_step(
                state.x, state.y, state.h, state.v, tau, dt,
                *profile.kernel_args(), w[0], w[1],
            )
            state = UnicycleState(nxt[0], nxt[1], nxt[2], nxt[3])
            t_sim += dt
            step += 1
            times.append(t_sim)
            states.append(state.as_array())
            obs = hit_obstacle(state)
            if obs >= 0:
                return ("collided", {"time": t_sim, "obstacle": obs})
            if at_goal(state):
                return ("reached_goal", {})

    def failsafe(timings, cycle_idx, state0, plan, cert, rep):
        """Execute the committed profile's remainder through to rest."""
        nonlocal outcome, detail
        profile = committed if committed is not None else _zero_profile(lim)
        tau0 = committed_tau if committed is not None else 0.0
        n_steps = max(0, int(round((profile.horizon - tau0) / dt)))
        cycles.append(CycleRecord(
            index=cycle_idx, state=state0, plan=plan, certificate=cert,
            repair_outcome=rep, action="failsafe", k_executed=None,
            timings=timings,
        ))
        ended = simulate(profile, tau0, n_steps, until_rest=True)
        if ended is None:
            outcome, detail = "failsafe_stop", {"cycle": cycle_idx}
        elif ended[0] == "reached_goal":
            outcome, detail = "reached_goal", {"cycles": cycle_idx + 1}
        else:
            outcome, detail = ended[0], ended[1]

    if at_goal(state):
        outcome, detail = "reached_goal", {"cycles": 0}

    cycle = 0
    while outcome is None and cycle < scenario.max_cycles:
        state0 = state
        x_hat = state  # perfect state estimation
        timings = dict.fromkeys(STAGE_KEYS, 0.0)

        t0 = time.perf_counter()
        problem = PlanningProblem(
            pose=x_hat.pose, goal=scenario.goal,
            obstacles=scenario.obstacles, frs=frs_plan, limits=lim,
            k_adm=scenario.k_adm, buffer=scenario.buffer,
        )
        timings["constraint_setup"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        plan = planner.solve(problem)
        timings["rtd_solve"] = time.perf_counter() - t0

        if not plan.feasible:
            timings["total"] = sum(timings[k] for k in STAGE_KEYS[:-1])
            failsafe(timings, cycle, state0, plan, None, None)
            break

        k = plan.k_star
        profile = param_to_commands(k, lim)

        t0 = time.perf_counter()
        n_ref = int(round(profile.horizon / scenario.dt_v))
        kernels.rollout(
            x_hat.as_array(), 0.0, scenario.dt_v, n_ref,
            *profile.kernel_args(), np.zeros((n_ref, 2)),
        )
        measured = measure_disturbance(
            profile, x_hat.pose, ps, tables.base
        ) if rax else None
        timings["reference_rollout"] = time.perf_counter() - t0

        cert = None
        rep = None
        if rax:
            t0 = time.perf_counter()
            cfg = UncertaintyConfig(
                epsilon=scenario.uncertainty.epsilon,
                pad=scenario.uncertainty.pad,
                w_lo=measured[0], w_hi=measured[1],
                w_times=tables.base.t_grid,
            )
            tube = propagate_tube(x_hat, cfg, profile, scenario.dt_v)
            cert = certify(tube, cert_obstacles)
            timings["verify"] = time.perf_counter() - t0

            if not cert.safe:
                t0 = time.perf_counter()
                ctx = RepairContext(
                    problem=problem,
                    config=scenario.repair_config,
                    pose=x_hat.pose,
                    w_estimate=_estimate_w(measured, cert, tube, scenario),
                    verify=_candidate_verifier(
                        x_hat, scenario, ps, tables.base, cert_obstacles
                    ),
                )
                rep = repair(k, cert, ctx)
                timings["repair_loop"] = time.perf_counter() - t0
                if rep.repaired:
                    k = rep.k_safe
                    profile = param_to_commands(k, lim)
                else:
                    timings["total"] = sum(timings[s] for s in STAGE_KEYS[:-1])
                    failsafe(timings, cycle, state0, plan, cert, rep)
                    break

        timings["total"] = sum(timings[s] for s in STAGE_KEYS[:-1])
        cycles.append(CycleRecord(
            index=cycle, state=state0, plan=plan, certificate=cert,
            repair_outcome=rep, action="execute", k_executed=k,
            timings=timings,
        ))

        committed = profile
        committed_tau = scenario.replan_period
        exec_measured = None
        if rax:
            exec_measured = measured if k == plan.k_star else \
                measure_disturbance(profile, x_hat.pose, ps, tables.base)
        ended = simulate(
            profile, 0.0, int(round(scenario.replan_period / dt)),
            measured=exec_measured,
        )
        if ended is not None:
            outcome, detail = ended[0], ended[1]
            if outcome == "reached_goal":
                detail = {"cycles": cycle + 1}
            break
        cycle += 1

    if outcome is None:
        outcome, detail = "max_cycles", {"cycles": scenario.max_cycles}

    states_arr = np.asarray(states)
    deltas = np.diff(states_arr[:, :2], axis=0)
    return RunResult(
        outcome=outcome,
        detail=detail,
        times=np.asarray(times),
        states=states_arr,
        cycles=tuple(cycles),
        path_length=float(np.hypot(deltas[:, 0], deltas[:, 1]).sum()),
        measured_violations=violations,
        scenario=scenario,
    )


def _estimate_w(measured, cert: Certificate, tube, scenario: Scenario):
    """Point estimate of the disturbance near the rejected collision.

    Midpoint of the measured interval at the footprint index nearest the
    first collision time; if that interval is zero, the midpoint of the
    hull over all indices.
    """
    lo, hi = measured
    t_col = float(tube.times[cert.first_collision[0]])
    j = min(int(round(t_col / scenario.dt_frs)), lo.shape[0] - 1)
    mid = 0.5 * (lo[j] + hi[j])
    if mid[0] == 0.0 and mid[1] == 0.0 and np.all(lo[j] == hi[j]):
        mid = 0.5 * (lo.min(axis=0) + hi.max(axis=0))
    return (float(mid[0]), float(mid[1]))


def _candidate_verifier(x_hat, scenario, ps, frs_base, cert_obstacles):
    """Bind cycle state into a TrajParam -> Certificate closure."""

    def verify(k: TrajParam) -> Certificate:
        profile = param_to_commands(k, scenario.limits)
        lo, hi = measure_disturbance(profile, x_hat.pose, ps, frs_base)
        cfg = UncertaintyConfig(
            epsilon=scenario.uncertainty.epsilon,
            pad=scenario.uncertainty.pad,
            w_lo=lo, w_hi=hi, w_times=frs_base.t_grid,
        )
        tube = propagate_tube(x_hat, cfg, profile, scenario.dt_v)
        return certify(tube, cert_obstacles)

    return verify


# ---------------------------------------------------------------------------
# timing benchmark


@dataclass(frozen=True)
class BenchTable:
    """Per-stage mean and standard deviation across trials."""

    rows: Tuple[Tuple[str, float, float], ...]
    trials: int
    cycles: int
    mode: str

    def format(self) -> str:
        width = max(len(name) for name, _, _ in self.rows)
        lines = [
            f"{self.mode}: {self.trials} trials, {self.cycles} cycles",
        ]
        for name, mean, std in self.rows:
            lines.append(
                f"  {name:<{width}}  {mean * 1e3:8.3f} ms +- {std * 1e3:.3f}"
            )
        return "\n".join(lines)

    def mean(self, row_name: str) -> float:
        for name, mean, _ in self.rows:
            if name == row_name:
                return mean
        raise KeyError(row_name)


def bench(scenario: Scenario, trials: int,
          tables: Optional[PreparedTables] = None, cache_dir=None) -> BenchTable:
    """Time the decision pipeline over repeated runs.

    One untimed warm-up run excludes one-time JIT and cache effects; the
    timed trials use distinct seeds.  Each stage is aggregated as the mean
    and standard deviation of per-trial means, so a single trial reports
    zero deviation.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if tables is None:
        tables = prepare_tables(scenario, cache_dir)
    kernels.warmup()
    run(scenario, tables=tables)  # warm-up, discarded

    per_trial = {key: [] for key in STAGE_KEYS}
    total_cycles = 0
    for trial in range(trials):
        result = run(
            replace(scenario, seed=scenario.seed + trial), tables=tables
        )
        if not result.cycles:
            continue
        total_cycles += len(result.cycles)
        for key in STAGE_KEYS:
            per_trial[key].append(
                float(np.mean([c.timings[key] for c in result.cycles]))
            )
    rows = []
    for name, key in BENCH_ROWS:
        vals = np.asarray(per_trial[key])
        if vals.size == 0:
            rows.append((name, 0.0, 0.0))
        else:
            rows.append((name, float(vals.mean()), float(vals.std())))
    return BenchTable(
        rows=tuple(rows), trials=trials, cycles=total_cycles,
        mode=scenario.mode,
    )


# ---------------------------------------------------------------------------
# trace files


def _cycle_record_dict(c: CycleRecord) -> dict:
    rec = {
        "type": "cycle",
        "index": c.index,
        "action": c.action,
        "feasible": c.plan.feasible,
        "k": list(c.k_executed.as_array()) if c.k_executed else None,
        "cost": c.plan.cost if c.plan.feasible else None,
        "evaluations": c.plan.evaluations,
        "verdict": c.certificate.verdict if c.certificate else None,
        "repair": None,
    }
    if c.repair_outcome is not None:
        rec["repair"] = {
            "result": c.repair_outcome.result,
            "attempts": [
                [tag, list(k.as_array()) if k else None, verdict]
                for tag, k, verdict in c.repair_outcome.attempts
            ],
        }
    return rec


def emit_trace(result: RunResult, path) -> None:
    """Write the run as newline-delimited JSON records.

    One header (schema, resolved scenario, outcome), one record per cycle,
    one per trajectory sample.  Keys are sorted and separators fixed, so
    identical runs produce byte-identical files.  Wall-clock timings are
    deliberately excluded.
    """
    from .scenario_io import scenario_to_dict

    records = [{
        "type": "header",
        "schema": TRACE_SCHEMA,
        "scenario": scenario_to_dict(result.scenario),
        "outcome": result.outcome,
        "detail": result.detail,
        "path_length": result.path_length,
        "measured_violations": result.measured_violations,
    }]
    records.extend(_cycle_record_dict(c) for c in result.cycles)
    records.extend(
        {
            "type": "step",
            "t": float(t),
            "x": float(s[0]),
            "y": float(s[1]),
            "h": float(s[2]),
            "v": float(s[3]),
        }
        for t, s in zip(result.times, result.states)
    )
    text = "".join(
        json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n"
        for rec in records
    )
    Path(path).write_text(text)


def read_trace(path):
    """Parse a trace file into its header and record list."""
    lines = Path(path).read_text().splitlines()
    records = [json.loads(line) for line in lines]
    if not records or records[0].get("schema") != TRACE_SCHEMA:
        raise ValueError("not a recognized trace file")
    return records[0], records[1:]


def replay(path, cache_dir=None) -> RunResult:
    """Re-run the scenario recorded in a trace header."""
    from .scenario_io import scenario_from_dict

    header, _ = read_trace(path)
    scenario = scenario_from_dict(header["scenario"])
    return run(scenario, cache_dir=cache_dir)
