"""JSON formats for scenarios, rule hierarchies, configs and results, plus
plot-data export.

All keys carry explicit units (meters, seconds, radians, m/s) to prevent unit
drift; hashes are over canonical (sorted-key) serializations so results embed
enough to reproduce themselves bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .config import (
    OfflineConfig,
    OnlineConfig,
    config_to_dict,
    offline_config_from_dict,
    online_config_from_dict,
)
from .dynamics import Control, EgoState, StateControlBounds
from .errors import ValidationError
from .geometry import Footprint, Pose
from .rules import RuleDef, RuleHierarchy, ViolationReport
from .scenario import DrivableArea, EgoSpec, Instance, Lane, Scenario

SCHEMA_VERSION = 1


def canonical_dumps(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def payload_hash(payload) -> str:
    return hashlib.sha256(canonical_dumps(payload).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Validation helpers (hand-rolled: precise JSON pointers in every error).
# ---------------------------------------------------------------------------


def _need(data, key, ptr, kind=None):
    if not isinstance(data, dict) or key not in data:
        raise ValidationError(f"{ptr}/{key}", "missing required field")
    value = data[key]
    if kind is not None and not isinstance(value, kind):
        raise ValidationError(f"{ptr}/{key}", f"expected {getattr(kind, '__name__', kind)}")
    return value


def _number(data, key, ptr, minimum=None):
    value = _need(data, key, ptr)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ValidationError(f"{ptr}/{key}", "expected a number")
    if minimum is not None and value < minimum:
        raise ValidationError(f"{ptr}/{key}", f"must be >= {minimum}")
    return float(value)


def _points(data, key, ptr, min_len=2):
    raw = _need(data, key, ptr, list)
    if len(raw) < min_len:
        raise ValidationError(f"{ptr}/{key}", f"needs at least {min_len} points")
    for i, p in enumerate(raw):
        if not (isinstance(p, list) and len(p) == 2
                and all(isinstance(c, (int, float)) for c in p)):
            raise ValidationError(f"{ptr}/{key}/{i}", "expected [x_m, y_m]")
    return np.asarray(raw, dtype=float)


def _footprint(data, ptr) -> Footprint:
    return Footprint(
        length=_number(data, "length_m", ptr, 0.0),
        width=_number(data, "width_m", ptr, 0.0),
        rear_to_cog=_number(data, "rear_to_cog_m", ptr, 0.0),
        front_to_cog=_number(data, "front_to_cog_m", ptr, 0.0),
    )


def footprint_to_dict(fp: Footprint) -> dict:
    return {"length_m": fp.length, "width_m": fp.width,
            "rear_to_cog_m": fp.rear_to_cog, "front_to_cog_m": fp.front_to_cog}


def _pose(data, ptr) -> Pose:
    return Pose(_number(data, "x_m", ptr), _number(data, "y_m", ptr),
                _number(data, "heading_rad", ptr))


def pose_to_dict(pose: Pose) -> dict:
    return {"x_m": pose.x, "y_m": pose.y, "heading_rad": pose.heading}


BOUND_KEYS = [
    ("v_min", "v_min_mps"), ("v_max", "v_max_mps"),
    ("a_min", "a_min_mps2"), ("a_max", "a_max_mps2"),
    ("jerk_min", "jerk_min_mps3"), ("jerk_max", "jerk_max_mps3"),
    ("delta_min", "delta_min_rad"), ("delta_max", "delta_max_rad"),
    ("omega_min", "omega_min_radps"), ("omega_max", "omega_max_radps"),
    ("steer_accel_min", "steer_accel_min_radps2"),
    ("steer_accel_max", "steer_accel_max_radps2"),
]

STATE_KEYS = [("s", "s_m"), ("d", "d_m"), ("mu", "mu_rad"), ("v", "v_mps"),
              ("a", "a_mps2"), ("delta", "delta_rad"), ("omega", "omega_radps")]


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "name": scenario.name,
        "map": {
            "lanes": [
                {"id": lane.lane_id,
                 "centerline_m": lane.centerline.tolist(),
                 "width_m": lane.width}
                for lane in scenario.lanes
            ],
            "drivable_area": {
                "spine_m": scenario.drivable.spine.tolist(),
                "left_extent_m": scenario.drivable.left_extent,
                "right_extent_m": scenario.drivable.right_extent,
                "polygon_m": scenario.drivable.polygon.tolist(),
            },
        },
        "ego": {
            "lane_id": scenario.ego.lane_id,
            "footprint": footprint_to_dict(scenario.ego.footprint),
            "initial_state": {json_key: getattr(scenario.ego.initial_state, attr)
                              for attr, json_key in STATE_KEYS},
        },
        "instances": [
            {
                "id": inst.instance_id,
                "type": inst.kind,
                "footprint": footprint_to_dict(inst.footprint),
                "pose": pose_to_dict(inst.pose),
                "motion": _motion_to_dict(inst),
            }
            for inst in scenario.instances
        ],
        "timing": {"duration_s": scenario.duration, "dt_s": scenario.dt},
        "bounds": {json_key: getattr(scenario.bounds, attr)
                   for attr, json_key in BOUND_KEYS},
        "rule_parameters": scenario.rule_parameters,
    }


def _motion_to_dict(inst: Instance) -> dict:
    if inst.motion == "static":
        return {"model": "static"}
    if inst.motion == "constant_velocity":
        return {"model": "constant_velocity",
                "vx_mps": inst.velocity[0], "vy_mps": inst.velocity[1]}
    return {"model": "scripted",
            "samples": [{"t_s": r[0], "x_m": r[1], "y_m": r[2],
                         "heading_rad": r[3], "v_mps": r[4]} for r in inst.script]}


def scenario_from_dict(data: dict) -> Scenario:
    ptr = ""
    if not isinstance(data, dict):
        raise ValidationError("", "scenario must be an object")
    name = data.get("name", "scenario")
    map_data = _need(data, "map", ptr, dict)
    lanes = []
    for i, lane_data in enumerate(_need(map_data, "lanes", "/map", list)):
        lptr = f"/map/lanes/{i}"
        lanes.append(Lane(
            lane_id=_need(lane_data, "id", lptr, str),
            centerline=_points(lane_data, "centerline_m", lptr),
            width=_number(lane_data, "width_m", lptr, 0.0),
        ))
    if len({l.lane_id for l in lanes}) != len(lanes):
        raise ValidationError("/map/lanes", "duplicate lane ids")
    area = _need(map_data, "drivable_area", "/map", dict)
    drivable = DrivableArea(
        spine=_points(area, "spine_m", "/map/drivable_area"),
        left_extent=_number(area, "left_extent_m", "/map/drivable_area", 0.0),
        right_extent=_number(area, "right_extent_m", "/map/drivable_area", 0.0),
    )

    ego_data = _need(data, "ego", ptr, dict)
    lane_id = _need(ego_data, "lane_id", "/ego", str)
    if lane_id not in {l.lane_id for l in lanes}:
        raise ValidationError("/ego/lane_id", f"unknown lane id {lane_id!r}")
    init = _need(ego_data, "initial_state", "/ego", dict)
    state = EgoState(**{attr: _number(init, json_key, "/ego/initial_state")
                        for attr, json_key in STATE_KEYS})
    ego = EgoSpec(
        footprint=_footprint(_need(ego_data, "footprint", "/ego", dict), "/ego/footprint"),
        initial_state=state,
        lane_id=lane_id,
    )

    timing = _need(data, "timing", ptr, dict)
    duration = _number(timing, "duration_s", "/timing", 0.0)
    dt = _number(timing, "dt_s", "/timing", 0.0)

    bounds_data = _need(data, "bounds", ptr, dict)
    bounds = StateControlBounds(**{attr: _number(bounds_data, json_key, "/bounds")
                                   for attr, json_key in BOUND_KEYS})

    instances = []
    for i, inst_data in enumerate(data.get("instances", [])):
        iptr = f"/instances/{i}"
        kind = _need(inst_data, "type", iptr, str)
        if kind not in ("pedestrian", "parked", "active"):
            raise ValidationError(f"{iptr}/type", f"unknown instance type {kind!r}")
        motion_data = _need(inst_data, "motion", iptr, dict)
        model = _need(motion_data, "model", f"{iptr}/motion", str)
        kwargs = {}
        if model == "constant_velocity":
            kwargs["velocity"] = (_number(motion_data, "vx_mps", f"{iptr}/motion"),
                                  _number(motion_data, "vy_mps", f"{iptr}/motion"))
        elif model == "scripted":
            samples = _need(motion_data, "samples", f"{iptr}/motion", list)
            script = []
            for j, s in enumerate(samples):
                sptr = f"{iptr}/motion/samples/{j}"
                script.append((
                    _number(s, "t_s", sptr), _number(s, "x_m", sptr),
                    _number(s, "y_m", sptr), _number(s, "heading_rad", sptr),
                    _number(s, "v_mps", sptr)))
            if script and script[-1][0] < duration:
                raise ValidationError(f"{iptr}/motion/samples",
                                      f"script ends at t={script[-1][0]} before "
                                      f"duration {duration}")
            kwargs["script"] = script
        elif model != "static":
            raise ValidationError(f"{iptr}/motion/model", f"unknown model {model!r}")
        instances.append(Instance(
            instance_id=_need(inst_data, "id", iptr, str),
            kind=kind,
            footprint=_footprint(_need(inst_data, "footprint", iptr, dict),
                                 f"{iptr}/footprint"),
            pose=_pose(_need(inst_data, "pose", iptr, dict), f"{iptr}/pose"),
            motion=model,
            **kwargs,
        ))
    if len({i.instance_id for i in instances}) != len(instances):
        raise ValidationError("/instances", "duplicate instance ids")

    rule_parameters = data.get("rule_parameters", {})
    if not isinstance(rule_parameters, dict):
        raise ValidationError("/rule_parameters", "expected an object")

    return Scenario(name=name, lanes=lanes, drivable=drivable, instances=instances,
                    ego=ego, duration=duration, dt=dt, bounds=bounds,
                    rule_parameters=rule_parameters)


def load_scenario(path: str | Path) -> Scenario:
    raw = json.loads(Path(path).read_text())
    return scenario_from_dict(raw)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario), indent=2))


# ---------------------------------------------------------------------------
# Rule hierarchy files.
# ---------------------------------------------------------------------------


def hierarchy_to_dict(hierarchy: RuleHierarchy) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "classes": [sorted(cls) for cls in hierarchy.classes],
        "rules": {
            rid: {"kind": rule.kind, "params": dict(rule.params)}
            for rid, rule in sorted(hierarchy.rules.items())
        },
    }


def hierarchy_from_dict(data: dict) -> RuleHierarchy:
    classes = _need(data, "classes", "", list)
    rules_data = _need(data, "rules", "", dict)
    rules = []
    for rid, rd in rules_data.items():
        kind = _need(rd, "kind", f"/rules/{rid}", str)
        params = rd.get("params", {})
        if not isinstance(params, dict):
            raise ValidationError(f"/rules/{rid}/params", "expected an object")
        try:
            rules.append(RuleDef(rid, kind, dict(params)))
        except Exception as exc:
            raise ValidationError(f"/rules/{rid}", str(exc)) from exc
    for i, cls in enumerate(classes):
        if not isinstance(cls, list) or not cls:
            raise ValidationError(f"/classes/{i}", "expected a non-empty array of rule ids")
        for rid in cls:
            if rid not in rules_data:
                raise ValidationError(f"/classes/{i}", f"undefined rule id {rid!r}")
    try:
        return RuleHierarchy.from_ordered(classes, rules)
    except Exception as exc:
        raise ValidationError("/classes", str(exc)) from exc


def load_hierarchy(path: str | Path) -> RuleHierarchy:
    return hierarchy_from_dict(json.loads(Path(path).read_text()))


def save_hierarchy(hierarchy: RuleHierarchy, path: str | Path) -> None:
    Path(path).write_text(json.dumps(hierarchy_to_dict(hierarchy), indent=2))


def load_offline_config(path: str | Path | None) -> OfflineConfig:
    if path is None:
        return OfflineConfig()
    return offline_config_from_dict(json.loads(Path(path).read_text()))


def load_online_config(path: str | Path | None) -> OnlineConfig:
    if path is None:
        return OnlineConfig()
    return online_config_from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# Result files.
# ---------------------------------------------------------------------------


def record_to_dict(record) -> dict:
    return {
        "t_s": record.times.tolist(),
        "dt_s": record.dt,
        "states": [
            {json_key: getattr(st, attr) for attr, json_key in STATE_KEYS}
            for st in record.states
        ],
        "poses": [pose_to_dict(p) for p in record.poses],
        "kappa_1pm": record.kappas.tolist(),
        "controls": [{"jerk_mps3": c.jerk, "steer_accel_radps2": c.steer_accel}
                     for c in record.controls],
        "instances": {iid: [pose_to_dict(p) for p in series]
                      for iid, series in record.instance_poses.items()},
    }


def record_from_dict(data: dict):
    from .rules import TrajectoryRecord
    states = [EgoState(**{attr: st[json_key] for attr, json_key in STATE_KEYS})
              for st in data["states"]]
    poses = [Pose(p["x_m"], p["y_m"], p["heading_rad"]) for p in data["poses"]]
    controls = [Control(c["jerk_mps3"], c["steer_accel_radps2"])
                for c in data["controls"]]
    instance_poses = {
        iid: [Pose(p["x_m"], p["y_m"], p["heading_rad"]) for p in series]
        for iid, series in data["instances"].items()
    }
    return TrajectoryRecord(
        times=np.asarray(data["t_s"]), states=states, controls=controls,
        poses=poses, kappas=np.asarray(data["kappa_1pm"]),
        instance_poses=instance_poses, dt=float(data["dt_s"]))


def report_to_dict(report: ViolationReport) -> dict:
    return {
        rid: {
            "total": entry.total,
            "active": entry.active,
            "instances": dict(sorted(entry.instance_scores.items())),
            "series": {iid: np.asarray(ser).tolist()
                       for iid, ser in sorted(entry.series.items())},
        }
        for rid, entry in sorted(report.entries.items())
    }


def violation_segments(report: ViolationReport, n_samples: int) -> list[dict]:
    """Maximal constant-violation segments for rendering.

    A sample's flag set is the rules with a positive instantaneous score
    there; consecutive samples with identical sets merge into one segment.
    """
    flags: list[frozenset[str]] = []
    for k in range(n_samples):
        active = set()
        for rid, entry in report.entries.items():
            for series in entry.series.values():
                if k < len(series) and series[k] > 0.0:
                    active.add(rid)
                    break
        flags.append(frozenset(active))
    segments = []
    start = 0
    for k in range(1, n_samples + 1):
        if k == n_samples or flags[k] != flags[start]:
            segments.append({"start": start, "end": k - 1,
                             "rules": sorted(flags[start])})
            start = k
    return segments


def export_plot_data(result_payload: dict) -> list[dict]:
    """Segment table from a result file payload (see ``violation_segments``)."""
    return result_payload["segments"]


def result_to_dict(
    mode: str,
    scenario: Scenario,
    hierarchy: RuleHierarchy,
    config,
    record,
    report: ViolationReport,
    extra: dict | None = None,
) -> dict:
    scenario_payload = scenario_to_dict(scenario)
    hierarchy_payload = hierarchy_to_dict(hierarchy)
    config_payload = config_to_dict(config)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "mode": mode,
        "scenario_hash": payload_hash(scenario_payload),
        "hierarchy_hash": payload_hash(hierarchy_payload),
        "config_hash": payload_hash(config_payload),
        "scenario": scenario_payload,
        "hierarchy": hierarchy_payload,
        "config": config_payload,
        "trajectory": record_to_dict(record),
        "violations": report_to_dict(report),
        "totals": {rid: report.total(rid) for rid in sorted(report.entries)},
        "segments": violation_segments(report, record.n_samples),
    }
    if extra:
        payload.update(extra)
    return payload


def save_result(payload: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(payload, indent=2))
