"""Rule definitions with three-level violation metrics, the totally-ordered
priority structure, trajectory comparison, the sorted power set, and online
rule activation.

Every rule scores on three levels, all normalized to [0, 1]: an instantaneous
score per time sample (and per instance where applicable), an instance score
aggregating over the trajectory (max for contact-style clearance rules, RMS
time integral for continuous rules), and a total score aggregating over
instances (root mean). Zero means the rule statement holds.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import Control, EgoState
from .errors import InvalidArgumentError
from .geometry import Footprint, Pose, lane_infringement, rect_distance
from .scenario import Scenario

RULE_KINDS = (
    "pedestrian_clearance",   # r1 template
    "drivable_area",          # r2
    "lane_keeping",           # r3
    "speed_max",              # r4
    "speed_min",              # r5
    "comfort",                # r6
    "parked_clearance",       # r7
    "active_clearance",       # r8
)

KIND_TO_INSTANCE = {
    "pedestrian_clearance": "pedestrian",
    "parked_clearance": "parked",
    "active_clearance": "active",
}


@dataclass(frozen=True)
class RuleDef:
    rule_id: str
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in RULE_KINDS:
            raise InvalidArgumentError(f"unknown rule kind {self.kind!r}")
        bad = [k for k, v in self.params.items() if isinstance(v, (int, float)) and v < 0]
        if bad:
            raise InvalidArgumentError(f"negative rule parameters: {bad}")

    @property
    def category(self) -> str:
        clearance = ("pedestrian_clearance", "parked_clearance", "active_clearance",
                     "drivable_area", "lane_keeping")
        return "clearance" if self.kind in clearance else "non-clearance"

    @property
    def instance_dependent(self) -> bool:
        return self.kind in KIND_TO_INSTANCE

    @property
    def instance_kind(self) -> str | None:
        return KIND_TO_INSTANCE.get(self.kind)

    def with_params(self, overrides: dict) -> "RuleDef":
        merged = dict(self.params)
        merged.update(overrides)
        return replace(self, params=merged)


DEFAULT_PARAMS = {
    "pedestrian_clearance": {"d": 1.0, "eta": 0.067, "v_max": 10.0},
    "drivable_area": {"d_max": 2.0},
    "lane_keeping": {"d_max": 2.0},
    "speed_max": {"v_limit": 7.0, "v_max": 10.0},
    "speed_min": {"v_limit": 3.0},
    "comfort": {"a_limit": 2.5, "a_max": 3.5, "a_lat_limit": 1.75, "a_lat_max": 3.5},
    "parked_clearance": {"d": 0.3, "eta": 0.13, "v_max": 10.0},
    "active_clearance": {
        "d_left": 0.5, "eta_left": 0.036,
        "d_right": 0.5, "eta_right": 0.036,
        "d_front": 1.0, "eta_front": 0.5,
        "v_max": 10.0,
    },
}


def default_rule(rule_id: str, kind: str, overrides: dict | None = None) -> RuleDef:
    params = dict(DEFAULT_PARAMS[kind])
    if overrides:
        params.update(overrides)
    return RuleDef(rule_id, kind, params)


@dataclass(frozen=True)
class RuleHierarchy:
    """Equivalence classes of rules under a total order; index 0 is the lowest
    priority class and priorities run 1..N."""

    classes: tuple[frozenset[str], ...]
    rules: dict[str, RuleDef]

    def __post_init__(self):
        seen: set[str] = set()
        for cls in self.classes:
            if not cls:
                raise InvalidArgumentError("empty equivalence class")
            if cls & seen:
                raise InvalidArgumentError("rule appears in more than one class")
            seen |= cls
        if seen != set(self.rules):
            raise InvalidArgumentError("classes and rule definitions disagree")

    @classmethod
    def from_ordered(cls, ordered: list[list[str]], rules: list[RuleDef]) -> "RuleHierarchy":
        return cls(tuple(frozenset(c) for c in ordered), {r.rule_id: r for r in rules})

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def priority_of(self, rule_id: str) -> int:
        for i, cls in enumerate(self.classes):
            if rule_id in cls:
                return i + 1
        raise InvalidArgumentError(f"unknown rule {rule_id!r}")

    def class_rules(self, priority: int) -> frozenset[str]:
        return self.classes[priority - 1]

    @property
    def rule_ids(self) -> list[str]:
        return [rid for cls in self.classes for rid in sorted(cls)]


def build_active_hierarchy(hierarchy: RuleHierarchy, detected_kinds: set[str]) -> RuleHierarchy:
    """Hierarchy with instance-dependent rules deleted unless their instance
    kind is currently detected; empty classes removed and priorities
    renumbered, preserving relative order."""
    kept_classes: list[frozenset[str]] = []
    kept_rules: dict[str, RuleDef] = {}
    for cls in hierarchy.classes:
        keep = set()
        for rid in cls:
            rule = hierarchy.rules[rid]
            if not rule.instance_dependent or rule.instance_kind in detected_kinds:
                keep.add(rid)
                kept_rules[rid] = rule
        if keep:
            kept_classes.append(frozenset(keep))
    return RuleHierarchy(tuple(kept_classes), kept_rules)


def sorted_power_set(hierarchy: RuleHierarchy, max_classes: int = 20) -> list[frozenset[int]]:
    """All subsets of class priorities, ordered by the highest priority they
    contain (ascending), then by size, then lexicographically.

    The first element is the empty set; relaxing in this order touches the
    highest-priority classes as late as possible.
    """
    n = hierarchy.n_classes
    if n > max_classes:
        raise InvalidArgumentError(
            f"{n} equivalence classes would enumerate 2^{n} subsets; limit is {max_classes}")
    subsets: list[frozenset[int]] = [frozenset()]
    priorities = list(range(1, n + 1))
    for size in range(1, n + 1):
        subsets.extend(frozenset(c) for c in itertools.combinations(priorities, size))
    subsets.sort(key=lambda s: (max(s, default=0), len(s), tuple(sorted(s))))
    return subsets


# ---------------------------------------------------------------------------
# Trajectory records and scoring.
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryRecord:
    """Uniformly sampled ego trajectory with the world state alongside."""

    times: np.ndarray
    states: list[EgoState]
    controls: list[Control]
    poses: list[Pose]  # global CoG poses
    kappas: np.ndarray
    instance_poses: dict[str, list[Pose]]
    dt: float

    def __post_init__(self):
        n = len(self.times)
        if len(self.states) != n or len(self.poses) != n or len(self.kappas) != n:
            raise InvalidArgumentError("inconsistent trajectory sample counts")
        if len(self.controls) not in (n, n - 1):
            raise InvalidArgumentError("control sample count must be N or N-1")
        for series in self.instance_poses.values():
            if len(series) != n:
                raise InvalidArgumentError("instance series length mismatch")

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    @property
    def n_samples(self) -> int:
        return len(self.times)


def center_pose(pose: Pose, footprint: Footprint) -> Pose:
    """Footprint-center pose from a CoG pose."""
    off = footprint.cog_to_center
    return Pose(pose.x + off * math.cos(pose.heading),
                pose.y + off * math.sin(pose.heading),
                pose.heading)


def _clip01(x: float) -> float:
    return min(max(x, 0.0), 1.0)


def _hinge_sq(excess: float, normalizer: float) -> float:
    if excess <= 0.0:
        return 0.0
    return _clip01((excess / normalizer) ** 2)


def instantaneous_violation(
    rule: RuleDef,
    record: TrajectoryRecord,
    scenario: Scenario,
    sample: int,
    instance_id: str | None = None,
) -> float:
    """Instantaneous score at one sample, in [0, 1]; zero iff the statement
    predicate holds there."""
    state = record.states[sample]
    p = rule.params
    kind = rule.kind

    if kind in ("pedestrian_clearance", "parked_clearance"):
        inst = _instance(scenario, instance_id)
        ego_c = center_pose(record.poses[sample], scenario.ego.footprint)
        inst_pose = record.instance_poses[instance_id][sample]
        d_min = rect_distance(ego_c, scenario.ego.footprint, inst_pose, inst.footprint)
        threshold = p["d"] + state.v * p["eta"]
        return _clip01(max(0.0, (threshold - d_min) / (p["d"] + p["v_max"] * p["eta"])) ** 2)

    if kind == "active_clearance":
        inst = _instance(scenario, instance_id)
        ego_c = center_pose(record.poses[sample], scenario.ego.footprint)
        inst_pose = record.instance_poses[instance_id][sample]
        d_min = rect_distance(ego_c, scenario.ego.footprint, inst_pose, inst.footprint)
        side = _bearing_side(ego_c, inst_pose)
        total = 0.0
        for name in ("left", "right", "front"):
            if side != name:
                continue
            thresh = p[f"d_{name}"] + state.v * p[f"eta_{name}"]
            norm = p[f"d_{name}"] + p["v_max"] * p[f"eta_{name}"]
            total += min(max(0.0, (thresh - d_min) / norm) ** 2, 1.0)
        return _clip01(total / 3.0)

    if kind in ("lane_keeping", "drivable_area"):
        ego_c = center_pose(record.poses[sample], scenario.ego.footprint)
        if kind == "lane_keeping":
            lane = scenario.ego_lane
            left, right = lane.left_boundary, lane.right_boundary
        else:
            left, right = scenario.drivable.left_boundary, scenario.drivable.right_boundary
        d_left, d_right = lane_infringement(
            ego_c, scenario.ego.footprint, left, right, d_max=p["d_max"])
        return _clip01(((d_left + d_right) / (2.0 * p["d_max"])) ** 2)

    if kind == "speed_max":
        return _hinge_sq(state.v - p["v_limit"], p["v_max"])

    if kind == "speed_min":
        return _hinge_sq(p["v_limit"] - state.v, p["v_limit"])

    if kind == "comfort":
        a_lat = record.kappas[sample] * state.v ** 2
        lon = _hinge_sq(abs(state.a) - p["a_limit"], p["a_max"])
        lat = _hinge_sq(abs(a_lat) - p["a_lat_limit"], p["a_lat_max"])
        return _clip01(0.5 * (lon + lat))

    raise InvalidArgumentError(f"unknown rule kind {kind!r}")


def _instance(scenario: Scenario, instance_id: str | None):
    if instance_id is None:
        raise InvalidArgumentError("instance-dependent rule needs an instance id")
    for inst in scenario.instances:
        if inst.instance_id == instance_id:
            return inst
    raise InvalidArgumentError(f"unknown instance {instance_id!r}")


def _bearing_side(ego_pose: Pose, other: Pose) -> str:
    """front / left / right / behind classification of the other's center."""
    dx, dy = other.x - ego_pose.x, other.y - ego_pose.y
    c, s = math.cos(ego_pose.heading), math.sin(ego_pose.heading)
    lon = c * dx + s * dy
    lat = -s * dx + c * dy
    angle = math.atan2(lat, lon)
    if abs(angle) <= math.pi / 4:
        return "front"
    if abs(angle) >= 3 * math.pi / 4:
        return "behind"
    return "left" if lat > 0 else "right"


MAX_AGGREGATED = ("pedestrian_clearance", "parked_clearance")


def instantaneous_series(
    rule: RuleDef,
    record: TrajectoryRecord,
    scenario: Scenario,
    instance_id: str | None = None,
) -> np.ndarray:
    return np.array([
        instantaneous_violation(rule, record, scenario, k, instance_id)
        for k in range(record.n_samples)
    ])


def instance_violation(
    rule: RuleDef,
    record: TrajectoryRecord,
    scenario: Scenario,
    instance_id: str | None = None,
) -> float:
    """Aggregate one instance's instantaneous series over the trajectory."""
    series = instantaneous_series(rule, record, scenario, instance_id)
    return aggregate_series(rule, series)


def aggregate_series(rule: RuleDef, series: np.ndarray) -> float:
    if series.size == 0:
        raise InvalidArgumentError("empty trajectory")
    if rule.kind in MAX_AGGREGATED:
        return _clip01(float(series.max()))
    return _clip01(float(math.sqrt(np.mean(series))))


@dataclass
class RuleReportEntry:
    total: float
    instance_scores: dict[str, float]
    series: dict[str, np.ndarray]
    active: bool


@dataclass
class ViolationReport:
    entries: dict[str, RuleReportEntry]

    def total(self, rule_id: str) -> float:
        return self.entries[rule_id].total

    @property
    def totals(self) -> dict[str, float]:
        return {rid: e.total for rid, e in self.entries.items()}

    def violated(self) -> set[str]:
        return {rid for rid, e in self.entries.items() if e.total > 0.0}


def total_violation(
    rule: RuleDef,
    record: TrajectoryRecord,
    scenario: Scenario,
) -> RuleReportEntry:
    """Root-mean aggregation over matching instances; instance-independent
    rules score a single anonymous series. Zero matching instances flags the
    rule inactive with a zero score."""
    if rule.instance_dependent:
        matching = [i for i in scenario.instances if i.kind == rule.instance_kind]
        if not matching:
            return RuleReportEntry(0.0, {}, {}, active=False)
        scores: dict[str, float] = {}
        series: dict[str, np.ndarray] = {}
        for inst in matching:
            ser = instantaneous_series(rule, record, scenario, inst.instance_id)
            series[inst.instance_id] = ser
            scores[inst.instance_id] = aggregate_series(rule, ser)
        total = _clip01(math.sqrt(sum(scores.values()) / len(scores)))
        return RuleReportEntry(total, scores, series, active=True)
    ser = instantaneous_series(rule, record, scenario, None)
    score = aggregate_series(rule, ser)
    return RuleReportEntry(score, {"ego": score}, {"ego": ser}, active=True)


def score_trajectory(
    record: TrajectoryRecord,
    scenario: Scenario,
    hierarchy: RuleHierarchy,
) -> ViolationReport:
    return ViolationReport({
        rid: total_violation(hierarchy.rules[rid], record, scenario)
        for rid in hierarchy.rule_ids
    })


# ---------------------------------------------------------------------------
# Trajectory comparison (lexicographic on the priority structure).
# ---------------------------------------------------------------------------

A_BETTER = "a-better"
B_BETTER = "b-better"
EQUIVALENT = "equivalent"


def _level_maxima(hierarchy: RuleHierarchy, totals: dict[str, float]) -> list[float]:
    """Max violated total per priority level, highest priority first."""
    out = []
    for priority in range(hierarchy.n_classes, 0, -1):
        scores = [totals[rid] for rid in hierarchy.class_rules(priority) if totals[rid] > 0.0]
        out.append(max(scores) if scores else 0.0)
    return out


def compare_trajectories(
    hierarchy: RuleHierarchy,
    report_a: ViolationReport,
    report_b: ViolationReport,
) -> str:
    """Which report is less violating under the priority structure.

    The trajectory whose highest violated priority is lower wins; ties break
    on the smaller maximum total at that priority, then descend one level and
    reiterate. Identical level maxima all the way down compare equivalent.
    """
    ids = set(hierarchy.rules)
    if set(report_a.entries) != ids or set(report_b.entries) != ids:
        raise InvalidArgumentError("reports do not cover the hierarchy's rule set")
    va = _level_maxima(hierarchy, report_a.totals)
    vb = _level_maxima(hierarchy, report_b.totals)
    for ma, mb in zip(va, vb):
        if (ma > 0.0) != (mb > 0.0):
            return A_BETTER if mb > 0.0 else B_BETTER
        if ma != mb:
            return A_BETTER if ma < mb else B_BETTER
    return EQUIVALENT
