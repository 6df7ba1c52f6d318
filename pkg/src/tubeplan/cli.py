"""Command-line entry points.

Four subcommands cover the whole workflow::

    tubeplan frs build   [--cache DIR] [--scenario FILE] [--n-k N] ...
    tubeplan run         SCENARIO [--mode standard|rax] [--seed N]
                         [--trace PATH] [--plot PATH] [--cache DIR]
    tubeplan bench       SCENARIO [--trials N] [--out PATH] [--cache DIR]
    tubeplan verify-only SCENARIO --k K1,K2 [--cache DIR]

SCENARIO is a YAML file path or the name of a packaged scenario.  Exit
codes: 0 goal reached / command ok, 2 collided (or candidate rejected in
verify-only), 3 fail-safe stop, 4 infeasible, cycle budget exhausted, or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import frs as frs_mod
from .dynamics import TrajParam, param_to_commands
from .harness import bench, emit_trace, measure_disturbance, prepare_tables, run
from .plotting import emit_plot
from .scenario_io import list_builtin, load_scenario
from .verifier import UncertaintyConfig, certify, propagate_tube

EXIT_OK = 0
EXIT_COLLIDED = 2
EXIT_FAILSAFE = 3
EXIT_CONFIG = 4

_OUTCOME_CODES = {
    "reached_goal": EXIT_OK,
    "collided": EXIT_COLLIDED,
    "failsafe_stop": EXIT_FAILSAFE,
    "max_cycles": EXIT_CONFIG,
}

_MODE_FLAGS = {"standard": "standard_rtd", "rax": "rtd_rax"}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tubeplan",
        description="Certified receding-horizon trajectory planning toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_frs = sub.add_parser("frs", help="offline footprint table management")
    frs_sub = p_frs.add_subparsers(dest="frs_command", required=True)
    p_build = frs_sub.add_parser("build", help="build and cache the table")
    p_build.add_argument("--cache", default="frs_cache", help="cache directory")
    p_build.add_argument("--scenario", help="take table parameters from a scenario")
    p_build.add_argument("--n-k", type=int, default=41, dest="n_k")
    p_build.add_argument("--dt-frs", type=float, default=0.025, dest="dt_frs")
    p_build.add_argument(
        "--robot-radius", type=float, default=0.2, dest="robot_radius"
    )

    p_run = sub.add_parser("run", help="simulate one scenario")
    p_run.add_argument("scenario", help="scenario file or built-in name")
    p_run.add_argument("--mode", choices=sorted(_MODE_FLAGS))
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--trace", help="write an NDJSON trace here")
    p_run.add_argument("--plot", help="write an SVG rendering here")
    p_run.add_argument("--cache", help="footprint table cache directory")

    p_bench = sub.add_parser("bench", help="time the decision pipeline")
    p_bench.add_argument("scenario")
    p_bench.add_argument("--trials", type=int, default=5)
    p_bench.add_argument("--mode", choices=sorted(_MODE_FLAGS))
    p_bench.add_argument("--out", help="write the timing table as JSON here")
    p_bench.add_argument("--cache")

    p_verify = sub.add_parser(
        "verify-only", help="certify one candidate from the scenario start"
    )
    p_verify.add_argument("scenario")
    p_verify.add_argument("--k", required=True, help="candidate as K1,K2")
    p_verify.add_argument("--cache")

    return parser


def _load(args) -> "Scenario":
    scenario = load_scenario(args.scenario)
    overrides = {}
    if getattr(args, "mode", None):
        overrides["mode"] = _MODE_FLAGS[args.mode]
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return replace(scenario, **overrides) if overrides else scenario


def _cmd_frs_build(args) -> int:
    if args.scenario:
        sc = load_scenario(args.scenario)
        lim, n_k = sc.limits, sc.n_k
        dt_frs, radius = sc.dt_frs, sc.robot_radius
    else:
        from .dynamics import VehicleLimits

        lim, n_k, dt_frs, radius = VehicleLimits(), args.n_k, args.dt_frs, \
            args.robot_radius
    t0 = time.perf_counter()
    table, was_built = frs_mod.load_or_build(
        args.cache, lim, n_k=n_k, dt_frs=dt_frs, robot_radius=radius
    )
    verb = "built" if was_built else "loaded"
    print(
        f"{verb} footprint table: {table.n_k}x{table.n_k} candidates, "
        f"{table.t_grid.shape[0]} time steps, "
        f"{time.perf_counter() - t0:.2f} s, cache={args.cache}"
    )
    return EXIT_OK


def _cmd_run(args) -> int:
    scenario = _load(args)
    result = run(scenario, cache_dir=args.cache)
    print(
        f"{scenario.name} [{scenario.mode}] seed={scenario.seed}: "
        f"{result.outcome} {result.detail}  "
        f"cycles={len(result.cycles)} path={result.path_length:.3f} m"
    )
    if args.trace:
        emit_trace(result, args.trace)
        print(f"trace written to {args.trace}")
    if args.plot:
        emit_plot(result, args.plot)
        print(f"plot written to {args.plot}")
    return _OUTCOME_CODES[result.outcome]


def _cmd_bench(args) -> int:
    scenario = _load(args)
    table = bench(scenario, trials=args.trials, cache_dir=args.cache)
    print(table.format())
    if args.out:
        payload = {
            "schema": "tubeplan-bench/1",
            "scenario": scenario.name,
            "mode": table.mode,
            "trials": table.trials,
            "cycles": table.cycles,
            "rows": [
                {"stage": name, "mean_s": mean, "std_s": std}
                for name, mean, std in table.rows
            ],
        }
        Path(args.out).write_text(json.dumps(payload, indent=2) + "\n")
        print(f"timing table written to {args.out}")
    return EXIT_OK


def _cmd_verify_only(args) -> int:
    scenario = _load(args)
    try:
        k1_s, k2_s = args.k.split(",")
        k = TrajParam(float(k1_s), float(k2_s))
    except ValueError as exc:
        raise ValueError(f"--k must be K1,K2 within [-1,1]: {exc}") from exc
    tables = prepare_tables(scenario, cache_dir=args.cache)
    profile = param_to_commands(k, scenario.limits)
    lo, hi = measure_disturbance(
        profile, scenario.start.pose, scenario.patches, tables.base
    )
    cfg = UncertaintyConfig(
        epsilon=scenario.uncertainty.epsilon,
        pad=scenario.uncertainty.pad,
        w_lo=lo, w_hi=hi, w_times=tables.base.t_grid,
    )
    from .geometry import offset_polygon

    tube = propagate_tube(scenario.start, cfg, profile, scenario.dt_v)
    cert = certify(
        tube,
        tuple(offset_polygon(o, scenario.robot_radius)
              for o in scenario.obstacles),
    )
    if cert.safe:
        print(f"k=({k.k1:g},{k.k2:g}) from {scenario.name} start: safe")
        return EXIT_OK
    j, obs = cert.first_collision
    print(
        f"k=({k.k1:g},{k.k2:g}) from {scenario.name} start: unsafe "
        f"(obstacle {obs} at t={tube.times[j]:.3f} s"
        f"{', swept hull' if cert.via_hull else ''})"
    )
    return EXIT_COLLIDED


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "frs":
            return _cmd_frs_build(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "bench":
            return _cmd_bench(args)
        return _cmd_verify_only(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        builtins = ", ".join(list_builtin()) or "none"
        print(f"error: {exc}\n(built-in scenarios: {builtins})", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
