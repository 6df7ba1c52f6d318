"""Repair ladder: rung arithmetic, ordering, dedup, budget, and three
end-to-end rung scenarios (backoff fixes overspeed, push fixes lateral
drift, tightening re-solves around a wall) run through the real verifier.
"""

import math
import time

import numpy as np
import pytest

from tubeplan.dynamics import (
    PlanState,
    TrajParam,
    UnicycleState,
    VehicleLimits,
    param_to_commands,
    plan_flow,
)
from tubeplan.frs import build_frs
from tubeplan.geometry import ConvexPolygon
from tubeplan.planner import PlanningProblem
from tubeplan.repair import (
    RepairConfig,
    RepairContext,
    RepairOutcome,
    lateral_push,
    repair,
    speed_backoff,
)
from tubeplan.verifier import Certificate, ReachTube, UncertaintyConfig, certify, propagate_tube

LIM = VehicleLimits()


@pytest.fixture(scope="module")
def frs_table():
    return build_frs(LIM, n_k=21, dt_frs=0.025, robot_radius=0.2)


def square(cx, cy, half):
    return ConvexPolygon([
        (cx - half, cy - half),
        (cx + half, cy - half),
        (cx + half, cy + half),
        (cx - half, cy + half),
    ])


def dummy_tube():
    z = np.zeros((2, 4))
    return ReachTube(times=np.array([0.0, 0.01]), lower=z, upper=z.copy())


def unsafe_cert():
    return Certificate(
        verdict="unsafe", first_collision=(0, 0), tube=dummy_tube()
    )


def make_ctx(problem, verify, w_estimate=(0.0, 0.0), pose=None, config=None):
    return RepairContext(
        problem=problem,
        config=config or RepairConfig(),
        pose=pose or PlanState(0.0, 0.0, 0.0),
        w_estimate=w_estimate,
        verify=verify,
    )


def fake_verify(predicate):
    """Certificate factory: safe iff predicate(k)."""

    def verify(k):
        if predicate(k):
            return Certificate(
                verdict="safe", first_collision=None, tube=dummy_tube()
            )
        return unsafe_cert()

    return verify


def open_problem(frs):
    return PlanningProblem(
        pose=PlanState(0.0, 0.0, 0.0),
        goal=(4.0, 0.0),
        obstacles=(),
        frs=frs,
        limits=LIM,
    )


# ---------------------------------------------------------------------------
# rung arithmetic


def test_speed_backoff_affine_inversion():
    k = speed_backoff(TrajParam(0.0, 1.0), 0.5)
    assert k.k2 == pytest.approx(0.0)
    assert k.k1 == 0.0
    # cruise speed scales by the factor through the parameter map
    v_before = (1.0 + 1.0) / 2 * LIM.v_max
    v_after = (k.k2 + 1.0) / 2 * LIM.v_max
    assert v_after == pytest.approx(0.5 * v_before)


def test_speed_backoff_zero_speed_fixed_point():
    for factor in (0.8, 0.6, 0.4):
        k = speed_backoff(TrajParam(0.3, -1.0), factor)
        assert k == TrajParam(0.3, -1.0)


def test_speed_backoff_preserves_turn_sign():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k1 = rng.uniform(-1, 1)
        k = speed_backoff(TrajParam(k1, rng.uniform(-1, 1)), rng.uniform(0.1, 0.9))
        assert k.k1 == k1


def test_speed_backoff_endpoint_strictly_closer():
    rng = np.random.default_rng(1)
    pose = PlanState(0.0, 0.0, 0.0)
    for _ in range(50):
        k = TrajParam(rng.uniform(-1, 1), rng.uniform(-0.9, 1))
        profile = param_to_commands(k, LIM)
        backed = param_to_commands(speed_backoff(k, rng.uniform(0.3, 0.9)), LIM)
        end = plan_flow(pose, profile, profile.horizon)
        end_b = plan_flow(pose, backed, backed.horizon)
        assert math.hypot(end_b.x, end_b.y) < math.hypot(end.x, end.y)


def test_speed_backoff_rejects_bad_factor():
    for factor in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            speed_backoff(TrajParam(0.0, 0.0), factor)


def test_lateral_push_sign_logic():
    pose = PlanState(0.0, 0.0, 0.0)
    # leftward drift (positive y in body frame): push right
    k = lateral_push(TrajParam(0.0, 0.5), (0.0, 0.3), pose, 0.1)
    assert k == TrajParam(-0.1, 0.5)
    # rightward drift: push left
    k = lateral_push(TrajParam(0.0, 0.5), (0.0, -0.3), pose, 0.1)
    assert k == TrajParam(0.1, 0.5)


def test_lateral_push_longitudinal_is_noop():
    pose = PlanState(0.0, 0.0, 0.0)
    k = TrajParam(0.4, 0.2)
    assert lateral_push(k, (0.3, 0.0), pose, 0.2) == k


def test_lateral_push_body_frame_rotation():
    # world +x disturbance seen from a pose facing +y is a rightward
    # (negative lateral) drift: push left
    pose = PlanState(0.0, 0.0, math.pi / 2)
    k = lateral_push(TrajParam(0.0, 0.0), (0.3, 0.0), pose, 0.1)
    assert k.k1 == pytest.approx(0.1)


def test_lateral_push_clamps_to_unit_box():
    pose = PlanState(0.0, 0.0, 0.0)
    k = lateral_push(TrajParam(-0.95, 0.0), (0.0, 0.4), pose, 0.3)
    assert k.k1 == -1.0
    k = lateral_push(TrajParam(0.95, 0.0), (0.0, -0.4), pose, 0.3)
    assert k.k1 == 1.0


def test_lateral_push_rejects_bad_step():
    with pytest.raises(ValueError):
        lateral_push(TrajParam(0, 0), (0.0, 0.1), PlanState(0, 0, 0), 0.0)


def test_repair_config_validation():
    with pytest.raises(ValueError):
        RepairConfig(speed_backoff_factors=())
    with pytest.raises(ValueError):
        RepairConfig(speed_backoff_factors=(0.4, 0.8))
    with pytest.raises(ValueError):
        RepairConfig(speed_backoff_factors=(1.0, 0.5))
    with pytest.raises(ValueError):
        RepairConfig(lateral_push_steps=(0.3, 0.1))
    with pytest.raises(ValueError):
        RepairConfig(tighten_buffers=(-0.05,))
    with pytest.raises(ValueError):
        RepairConfig(time_budget=0.0)


def test_repair_requires_unsafe_certificate(frs_table):
    safe = Certificate(verdict="safe", first_collision=None, tube=dummy_tube())
    ctx = make_ctx(open_problem(frs_table), fake_verify(lambda k: True))
    with pytest.raises(ValueError):
        repair(TrajParam(0, 0), safe, ctx)


def test_repaired_outcome_requires_safe_certificate():
    with pytest.raises(ValueError):
        RepairOutcome(
            result="repaired", k_safe=TrajParam(0, 0),
            certificate=unsafe_cert(), attempts=(), elapsed=0.0,
        )


# ---------------------------------------------------------------------------
# ladder logic against fake verifiers


def test_ladder_stops_at_first_safe_backoff(frs_table):
    # safe as soon as the cruise speed is at most 80% of the original
    k0 = TrajParam(0.2, 1.0)
    verify = fake_verify(lambda k: k.k2 <= 0.6 + 1e-12)
    out = repair(k0, unsafe_cert(), make_ctx(open_problem(frs_table), verify))
    assert out.repaired
    assert out.k_safe.k2 == pytest.approx(0.6)
    assert [a[0] for a in out.attempts] == ["backoff:0.8"]
    assert out.certificate.safe


def test_ladder_reaches_push_in_order(frs_table):
    # nothing helps until the turn parameter moves at least 0.2 to the
    # right; drift is leftward so pushes go that way
    k0 = TrajParam(0.0, 1.0)
    verify = fake_verify(lambda k: k.k1 <= -0.2 + 1e-12)
    out = repair(
        k0, unsafe_cert(),
        make_ctx(open_problem(frs_table), verify, w_estimate=(0.0, 0.3)),
    )
    assert out.repaired
    assert out.k_safe.k1 == pytest.approx(-0.2)
    tags = [a[0] for a in out.attempts]
    assert tags == [
        "backoff:0.8", "backoff:0.6", "backoff:0.4",
        "push:none:0.1", "push:none:0.2",
    ]
    assert all(v == "unsafe" for _, _, v in out.attempts[:-1])
    assert out.attempts[-1][2] == "safe"


def test_ladder_full_traversal_order_and_dedup(frs_table):
    # never safe: the whole ladder runs; the open-world re-solve returns
    # the same parameter for every buffer, so only the first tighten trial
    # verifies and the rest dedup away
    k0 = TrajParam(0.0, 1.0)
    verify = fake_verify(lambda k: False)
    out = repair(
        k0, unsafe_cert(),
        make_ctx(open_problem(frs_table), verify, w_estimate=(0.0, 0.2)),
    )
    assert not out.repaired and out.result == "exhausted"
    tags = [a[0] for a in out.attempts]
    stages = [t.split(":")[0] for t in tags]
    # ladder order: all backoffs, then pushes, then tightens
    assert stages == sorted(
        stages, key=["backoff", "push", "tighten"].index
    )
    assert stages.count("backoff") == 3
    assert stages.count("push") == 12
    assert stages.count("tighten") == 1
    # push bases appear in tried order: none, then each backoff level
    push_bases = [t.split(":")[1] for t in tags if t.startswith("push")]
    assert push_bases == (
        ["none"] * 3 + ["0.8"] * 3 + ["0.6"] * 3 + ["0.4"] * 3
    )
    # no parameter tried twice
    ks = [(a[1].k1, a[1].k2) for a in out.attempts if a[1] is not None]
    assert len(ks) == len(set(ks))


def test_ladder_skips_degenerate_backoffs(frs_table):
    # zero-speed candidate: every backoff is a fixed point and dedups
    # against the rejected parameter; pushes on all bases coincide too
    k0 = TrajParam(0.0, -1.0)
    verify = fake_verify(lambda k: False)
    out = repair(
        k0, unsafe_cert(),
        make_ctx(open_problem(frs_table), verify, w_estimate=(0.0, 0.2)),
    )
    tags = [a[0] for a in out.attempts]
    assert not any(t.startswith("backoff") for t in tags)
    assert sum(t.startswith("push") for t in tags) == 3  # one per step size


def test_ladder_budget_cuts_off(frs_table):
    calls = []

    def slow_verify(k):
        calls.append(k)
        time.sleep(0.01)
        return unsafe_cert()

    cfg = RepairConfig(time_budget=0.005)
    out = repair(
        TrajParam(0.0, 1.0), unsafe_cert(),
        make_ctx(open_problem(frs_table), slow_verify, config=cfg),
    )
    assert out.result == "exhausted"
    assert len(calls) == 1  # first trial in flight finishes, then cutoff
    assert out.elapsed < cfg.time_budget + 0.05


def test_ladder_budget_allows_multiple_fast_trials(frs_table):
    verify = fake_verify(lambda k: False)
    cfg = RepairConfig(time_budget=10.0)
    out = repair(
        TrajParam(0.3, 0.8), unsafe_cert(),
        make_ctx(open_problem(frs_table), verify, config=cfg),
    )
    assert len(out.attempts) >= 3
    assert out.elapsed < 10.0


# ---------------------------------------------------------------------------
# end-to-end rungs through the real verifier


def real_verify(x_hat, obstacles, w_lo=(0.0, 0.0), w_hi=(0.0, 0.0)):
    cfg = UncertaintyConfig(w_lo=w_lo, w_hi=w_hi)

    def verify(k):
        profile = param_to_commands(k, LIM)
        tube = propagate_tube(x_hat, cfg, profile, dt_v=0.01)
        return certify(tube, obstacles)

    return verify, cfg


def test_overspeed_repaired_at_first_backoff(frs_table):
    # wall between the tube reach at 80% speed (3.63 m) and at full speed
    # (4.40 m): the rejected candidate hits, the first backoff clears
    wall = square(3.9, 0.0, 0.15)
    x_hat = UnicycleState(0.0, 0.0, 0.0, 2.0)
    verify, _ = real_verify(x_hat, [wall])
    k0 = TrajParam(0.0, 1.0)
    cert0 = verify(k0)
    assert not cert0.safe

    problem = PlanningProblem(
        pose=x_hat.pose, goal=(6.0, 0.0), obstacles=(wall,),
        frs=frs_table, limits=LIM,
    )
    ctx = make_ctx(problem, verify, config=RepairConfig(time_budget=10.0))
    out = repair(k0, cert0, ctx)
    assert out.repaired
    assert out.attempts[0][0] == "backoff:0.8"
    assert len(out.attempts) == 1
    # independent re-verification of the repaired candidate
    assert verify(out.k_safe).safe


def test_lateral_drift_repaired_by_push(frs_table):
    # strong leftward disturbance drifts the tube into a wall running
    # along the left side; backoffs do not reduce the drift, a rightward
    # push does
    wall = ConvexPolygon([(0.5, 0.35), (3.5, 0.35), (3.5, 1.2), (0.5, 1.2)])
    x_hat = UnicycleState(0.0, 0.0, 0.0, 2.0)
    verify, _ = real_verify(x_hat, [wall], w_lo=(0.0, 0.25), w_hi=(0.0, 0.35))
    k0 = TrajParam(0.0, 1.0)
    cert0 = verify(k0)
    assert not cert0.safe

    problem = PlanningProblem(
        pose=x_hat.pose, goal=(5.0, 0.0), obstacles=(wall,),
        frs=frs_table, limits=LIM,
    )
    # harness-style estimate: midpoint of the measured bounds
    ctx = make_ctx(
        problem, verify, w_estimate=(0.0, 0.3),
        config=RepairConfig(time_budget=10.0),
    )
    out = repair(k0, cert0, ctx)
    assert out.repaired
    tag = out.attempts[-1][0]
    assert tag.startswith("push:")
    assert out.k_safe.k1 < 0.0  # pushed right, against the drift
    assert verify(out.k_safe).safe


def test_blocked_front_repaired_by_tightening(frs_table):
    # wide wall one meter ahead of a robot doing 1 m/s: backoffs of the
    # full-speed candidate still overrun it (tracking lag included) and a
    # push within +-0.3 cannot steer around, but the tightened re-solve
    # finds a crawl candidate that stays short of the wall
    wall = ConvexPolygon([(1.0, -0.8), (1.3, -0.8), (1.3, 0.8), (1.0, 0.8)])
    x_hat = UnicycleState(0.0, 0.0, 0.0, 1.0)
    verify, _ = real_verify(x_hat, [wall])
    k0 = TrajParam(0.0, 1.0)
    cert0 = verify(k0)
    assert not cert0.safe

    problem = PlanningProblem(
        pose=x_hat.pose, goal=(3.0, 0.0), obstacles=(wall,),
        frs=frs_table, limits=LIM,
    )
    ctx = make_ctx(
        problem, verify, w_estimate=(0.0, 0.3),
        config=RepairConfig(time_budget=10.0),
    )
    out = repair(k0, cert0, ctx)
    assert out.repaired
    assert out.attempts[-1][0].startswith("tighten:")
    assert verify(out.k_safe).safe
    # the fix is a slowdown: cruise speed well below the original
    assert out.k_safe.k2 < 0.0


def test_fully_boxed_in_exhausts_ladder(frs_table):
    # obstacles on all sides close enough that nothing certifies and the
    # re-solve is infeasible at every buffer
    walls = (
        square(0.6, 0.0, 0.25),
        square(-0.6, 0.0, 0.25),
        square(0.0, 0.6, 0.25),
        square(0.0, -0.6, 0.25),
        square(0.45, 0.45, 0.25),
        square(0.45, -0.45, 0.25),
        square(-0.45, 0.45, 0.25),
        square(-0.45, -0.45, 0.25),
    )
    x_hat = UnicycleState(0.0, 0.0, 0.0, 1.0)
    verify, _ = real_verify(x_hat, list(walls))
    k0 = TrajParam(0.0, 0.5)
    cert0 = verify(k0)
    assert not cert0.safe

    problem = PlanningProblem(
        pose=x_hat.pose, goal=(3.0, 0.0), obstacles=walls,
        frs=frs_table, limits=LIM,
    )
    ctx = make_ctx(
        problem, verify, w_estimate=(0.0, 0.1),
        config=RepairConfig(time_budget=10.0),
    )
    out = repair(k0, cert0, ctx)
    assert out.result == "exhausted"
    tags = [a[0] for a in out.attempts]
    stages = {t.split(":")[0] for t in tags}
    assert stages == {"backoff", "push", "tighten"}
    # every verified trial came back unsafe; a moving candidate cannot
    # stop dead inside the ring
    for _, k, verdict in out.attempts:
        assert verdict in ("unsafe", "infeasible")
