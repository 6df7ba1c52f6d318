"""Scenario files: a small, strict YAML schema for experiments.

A scenario file is a flat mapping with a ``schema`` tag plus nested blocks
for limits, uncertainty, repair, obstacles, and disturbance patches.  Every
field except the identity block (schema, name, start, goal, goal_radius)
has a default, so files stay short; unknown keys are rejected everywhere so
typos fail loudly instead of silently reverting to defaults.

Shapes accept three spellings::

    rect: [x0, y0, x1, y1]
    polygon: [[x, y], ...]            # counterclockwise, convex
    rotated_rect: {center: [x, y], size: [w, h], angle: a}

The module also converts scenarios to and from plain dicts; trace headers
embed that dict so a recorded run can be replayed bit for bit.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .dynamics import DisturbancePatch, UnicycleState, VehicleLimits
from .geometry import ConvexPolygon, IntervalVector
from .harness import Scenario
from .planner import FULL_PARAM_BOX
from .repair import RepairConfig
from .verifier import UncertaintyConfig

SCENARIO_SCHEMA = "tubeplan-scenario/1"

_TOP_KEYS = {
    "schema", "name", "mode", "seed", "start", "goal", "goal_radius",
    "replan_period", "max_cycles", "robot_radius", "n_k", "dt_frs", "dt_v",
    "dt_sim", "buffer", "k_adm", "v0_offset_range", "tracking_samples",
    "tracking_seed", "realization", "limits", "uncertainty", "repair",
    "obstacles", "patches",
}
_REQUIRED = ("schema", "name", "start", "goal", "goal_radius")

_LIMIT_KEYS = {"v_max", "w_max", "a_max", "k_a", "t_plan", "t_stop"}
_UNCERTAINTY_KEYS = {"epsilon", "pad"}
_REPAIR_KEYS = {
    "speed_backoff_factors", "lateral_push_steps", "tighten_buffers",
    "time_budget",
}
_START_KEYS = {"x", "y", "heading", "speed"}
_SHAPE_KEYS = {"rect", "polygon", "rotated_rect"}
_PATCH_KEYS = {"region", "w_lo", "w_hi"}


def _reject_unknown(mapping: dict, allowed: set, where: str) -> None:
    if not isinstance(mapping, dict):
        raise ValueError(f"{where} must be a mapping")
    unknown = sorted(set(mapping) - allowed)
    if unknown:
        raise ValueError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _floats(value, n: int, where: str) -> tuple:
    seq = list(value) if isinstance(value, (list, tuple)) else None
    if seq is None or len(seq) != n:
        raise ValueError(f"{where} must be a list of {n} numbers")
    return tuple(float(v) for v in seq)


def parse_shape(entry, where: str) -> ConvexPolygon:
    """Expand one shape entry (rect / polygon / rotated_rect) to a polygon."""
    _reject_unknown(entry, _SHAPE_KEYS, where)
    if len(entry) != 1:
        raise ValueError(f"{where} must carry exactly one shape key")
    kind, value = next(iter(entry.items()))
    if kind == "rect":
        x0, y0, x1, y1 = _floats(value, 4, f"{where}.rect")
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"{where}.rect must satisfy x1 > x0 and y1 > y0")
        return ConvexPolygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])
    if kind == "polygon":
        if not isinstance(value, (list, tuple)) or len(value) < 3:
            raise ValueError(f"{where}.polygon needs at least 3 vertices")
        return ConvexPolygon([_floats(p, 2, f"{where}.polygon[{i}]")
                              for i, p in enumerate(value)])
    _reject_unknown(value, {"center", "size", "angle"}, f"{where}.rotated_rect")
    cx, cy = _floats(value.get("center"), 2, f"{where}.rotated_rect.center")
    w, h = _floats(value.get("size"), 2, f"{where}.rotated_rect.size")
    if not (w > 0 and h > 0):
        raise ValueError(f"{where}.rotated_rect.size must be positive")
    a = float(value.get("angle", 0.0))
    c, s = np.cos(a), np.sin(a)
    corners = [(-w / 2, -h / 2), (w / 2, -h / 2), (w / 2, h / 2), (-w / 2, h / 2)]
    return ConvexPolygon(
        [(cx + c * px - s * py, cy + s * px + c * py) for px, py in corners]
    )


def _parse_start(value) -> UnicycleState:
    _reject_unknown(value, _START_KEYS, "start")
    return UnicycleState(
        x=float(value.get("x", 0.0)),
        y=float(value.get("y", 0.0)),
        h=float(value.get("heading", 0.0)),
        v=float(value.get("speed", 0.0)),
    )


def _parse_limits(value) -> VehicleLimits:
    _reject_unknown(value, _LIMIT_KEYS, "limits")
    return VehicleLimits(**{k: float(v) for k, v in value.items()})


def _parse_uncertainty(value) -> UncertaintyConfig:
    _reject_unknown(value, _UNCERTAINTY_KEYS, "uncertainty")
    kwargs = {}
    if "epsilon" in value:
        kwargs["epsilon"] = _floats(value["epsilon"], 4, "uncertainty.epsilon")
    if "pad" in value:
        kwargs["pad"] = _floats(value["pad"], 4, "uncertainty.pad")
    return UncertaintyConfig(**kwargs)


def _parse_repair(value) -> RepairConfig:
    _reject_unknown(value, _REPAIR_KEYS, "repair")
    kwargs = {}
    for key in ("speed_backoff_factors", "lateral_push_steps", "tighten_buffers"):
        if key in value:
            kwargs[key] = tuple(float(v) for v in value[key])
    if "time_budget" in value:
        kwargs["time_budget"] = float(value["time_budget"])
    return RepairConfig(**kwargs)


def _parse_k_adm(value) -> IntervalVector:
    _reject_unknown(value, {"k1", "k2"}, "k_adm")
    k1 = _floats(value.get("k1", (-1.0, 1.0)), 2, "k_adm.k1")
    k2 = _floats(value.get("k2", (-1.0, 1.0)), 2, "k_adm.k2")
    return IntervalVector([k1[0], k2[0]], [k1[1], k2[1]])


def _parse_patch(entry, where: str) -> DisturbancePatch:
    _reject_unknown(entry, _PATCH_KEYS, where)
    if "region" not in entry:
        raise ValueError(f"{where} needs a region")
    return DisturbancePatch(
        region=parse_shape(entry["region"], f"{where}.region"),
        w_lo=_floats(entry.get("w_lo", (0.0, 0.0)), 2, f"{where}.w_lo"),
        w_hi=_floats(entry.get("w_hi", (0.0, 0.0)), 2, f"{where}.w_hi"),
    )


def scenario_from_dict(data: dict) -> Scenario:
    """Build a scenario from a parsed mapping, applying defaults strictly."""
    _reject_unknown(data, _TOP_KEYS, "scenario")
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise ValueError(f"scenario missing required key(s): {', '.join(missing)}")
    if data["schema"] != SCENARIO_SCHEMA:
        raise ValueError(
            f"unsupported schema {data['schema']!r}; expected {SCENARIO_SCHEMA!r}"
        )

    kwargs = {
        "name": str(data["name"]),
        "start": _parse_start(data["start"]),
        "goal": _floats(data["goal"], 2, "goal"),
        "goal_radius": float(data["goal_radius"]),
    }
    if "obstacles" in data:
        obstacles = data["obstacles"] or []
        kwargs["obstacles"] = tuple(
            parse_shape(o, f"obstacles[{i}]") for i, o in enumerate(obstacles)
        )
    if "patches" in data:
        patches = data["patches"] or []
        kwargs["patches"] = tuple(
            _parse_patch(p, f"patches[{i}]") for i, p in enumerate(patches)
        )
    if "limits" in data:
        kwargs["limits"] = _parse_limits(data["limits"])
    if "uncertainty" in data:
        kwargs["uncertainty"] = _parse_uncertainty(data["uncertainty"])
    if "repair" in data:
        kwargs["repair_config"] = _parse_repair(data["repair"])
    if "k_adm" in data:
        kwargs["k_adm"] = _parse_k_adm(data["k_adm"])
    if "mode" in data:
        kwargs["mode"] = str(data["mode"])
    if "realization" in data:
        kwargs["realization"] = str(data["realization"])
    if "replan_period" in data and data["replan_period"] is not None:
        kwargs["replan_period"] = float(data["replan_period"])
    if "v0_offset_range" in data:
        kwargs["v0_offset_range"] = _floats(
            data["v0_offset_range"], 2, "v0_offset_range"
        )
    for key, cast in (
        ("seed", int), ("max_cycles", int), ("n_k", int),
        ("tracking_samples", int), ("tracking_seed", int),
        ("robot_radius", float), ("dt_frs", float), ("dt_v", float),
        ("dt_sim", float), ("buffer", float),
    ):
        if key in data:
            kwargs[key] = cast(data[key])
    return Scenario(**kwargs)


def scenario_to_dict(s: Scenario) -> dict:
    """Fully resolved plain-dict form; inverse of scenario_from_dict."""
    lim = s.limits
    unc = s.uncertainty
    rep = s.repair_config
    return {
        "schema": SCENARIO_SCHEMA,
        "name": s.name,
        "mode": s.mode,
        "seed": s.seed,
        "start": {
            "x": float(s.start.x), "y": float(s.start.y),
            "heading": float(s.start.h), "speed": float(s.start.v),
        },
        "goal": [float(g) for g in s.goal],
        "goal_radius": float(s.goal_radius),
        "replan_period": float(s.replan_period),
        "max_cycles": s.max_cycles,
        "robot_radius": float(s.robot_radius),
        "n_k": s.n_k,
        "dt_frs": float(s.dt_frs),
        "dt_v": float(s.dt_v),
        "dt_sim": float(s.dt_sim),
        "buffer": float(s.buffer),
        "k_adm": {
            "k1": [float(s.k_adm.lo[0]), float(s.k_adm.hi[0])],
            "k2": [float(s.k_adm.lo[1]), float(s.k_adm.hi[1])],
        },
        "v0_offset_range": [float(v) for v in s.v0_offset_range],
        "tracking_samples": s.tracking_samples,
        "tracking_seed": s.tracking_seed,
        "realization": s.realization,
        "limits": {
            "v_max": float(lim.v_max), "w_max": float(lim.w_max),
            "a_max": float(lim.a_max), "k_a": float(lim.k_a),
            "t_plan": float(lim.t_plan), "t_stop": float(lim.t_stop),
        },
        "uncertainty": {
            "epsilon": list(map(float, unc.epsilon)),
            "pad": list(map(float, unc.pad)),
        },
        "repair": {
            "speed_backoff_factors": list(rep.speed_backoff_factors),
            "lateral_push_steps": list(rep.lateral_push_steps),
            "tighten_buffers": list(rep.tighten_buffers),
            "time_budget": float(rep.time_budget),
        },
        "obstacles": [
            {"polygon": o.vertices.tolist()} for o in s.obstacles
        ],
        "patches": [
            {
                "region": {"polygon": p.region.vertices.tolist()},
                "w_lo": [float(w) for w in p.w_lo],
                "w_hi": [float(w) for w in p.w_hi],
            }
            for p in s.patches
        ],
    }


def load_scenario(path) -> Scenario:
    """Read one scenario from a YAML file or a built-in name."""
    p = Path(path)
    if not p.exists():
        builtin = _builtin_path(str(path))
        if builtin is None:
            raise FileNotFoundError(
                f"no scenario file {path!r} and no built-in by that name "
                f"(built-ins: {', '.join(list_builtin())})"
            )
        p = builtin
    data = yaml.safe_load(p.read_text())
    if not isinstance(data, dict):
        raise ValueError(f"scenario file {p} must contain a mapping")
    return scenario_from_dict(data)


def save_scenario(s: Scenario, path) -> None:
    Path(path).write_text(
        yaml.safe_dump(scenario_to_dict(s), sort_keys=False)
    )


def _builtin_dir():
    return resources.files("tubeplan") / "scenarios"


def _builtin_path(name: str):
    if not name.replace("_", "").replace("-", "").isalnum():
        return None
    candidate = _builtin_dir() / f"{name}.yaml"
    return candidate if candidate.is_file() else None


def list_builtin():
    """Names of the scenario files shipped inside the package."""
    d = _builtin_dir()
    if not d.is_dir():
        return []
    return sorted(f.name[:-5] for f in d.iterdir() if f.name.endswith(".yaml"))
