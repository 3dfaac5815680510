"""Built-in study scenarios and the default rule hierarchy.

The three scenarios share one road template: a straight two-lane segment with
the ego lane on top (centerline y = 0, width 3.5) and an adjacent lane below.
Geometry is sized so that passing the blocking instance is feasible only well
below the minimum speed limit, which is what forces the relaxation ladder to
the speed-minimum class first. Configs for these fixtures push the coverage
trade-off toward more, tighter disks (coverage_beta = 20) so the disk
over-approximation does not dominate the corridors.
"""

from __future__ import annotations

import numpy as np

from .config import OfflineConfig, OnlineConfig
from .dynamics import EgoState, StateControlBounds
from .geometry import Footprint, Pose
from .rules import RuleDef, RuleHierarchy
from .scenario import DrivableArea, EgoSpec, Instance, Lane, Scenario

VEHICLE_FP = Footprint.centered(4.0, 1.8)
PED_FP = Footprint.centered(0.6, 0.6)

RULE_PARAMS = {
    "r1": {"d": 1.0, "eta": 0.067, "v_max": 10.0},
    "r2": {"d_max": 2.0},
    "r3": {"d_max": 2.0},
    "r4": {"v_limit": 7.0, "v_max": 10.0},
    "r5": {"v_limit": 3.0},
    "r6": {"a_limit": 2.5, "a_max": 3.5, "a_lat_limit": 1.75, "a_lat_max": 3.5},
    "r7": {"d": 0.3, "eta": 0.35, "v_max": 10.0},
    "r8": {"d_left": 0.4, "eta_left": 0.05, "d_right": 0.4, "eta_right": 0.05,
           "d_front": 1.0, "eta_front": 0.15, "v_max": 10.0},
}

RULE_KINDS = {
    "r1": "pedestrian_clearance",
    "r2": "drivable_area",
    "r3": "lane_keeping",
    "r4": "speed_max",
    "r5": "speed_min",
    "r6": "comfort",
    "r7": "parked_clearance",
    "r8": "active_clearance",
}

# Lowest priority first: minimum speed, then lane keeping + comfort, maximum
# speed, drivable area, vehicle clearances, pedestrian clearance on top.
HIERARCHY_CLASSES = [["r5"], ["r3", "r6"], ["r4"], ["r2"], ["r7", "r8"], ["r1"]]


def default_hierarchy() -> RuleHierarchy:
    rules = [RuleDef(rid, RULE_KINDS[rid], dict(RULE_PARAMS[rid]))
             for rid in RULE_PARAMS]
    return RuleHierarchy.from_ordered(HIERARCHY_CLASSES, rules)


def fixture_offline_config(**overrides) -> OfflineConfig:
    base = dict(coverage_beta=20.0, coverage_z_max=6, clearance_margin=0.15)
    base.update(overrides)
    return OfflineConfig(**base)


def fixture_online_config(**overrides) -> OnlineConfig:
    # The 12 m sensing disk makes the information deficit bite: the offline
    # runs brake at the chain-onset distance (~15 m), while the online ego
    # only learns of a blocking instance late enough that it must brake much
    # harder, which is what makes its minimum-speed score visibly worse.
    base = dict(coverage_beta=20.0, coverage_z_max=6, clearance_margin=0.15,
                horizon_s=5.0, feasibility_horizon_s=2.0, sensing_radius=12.0)
    base.update(overrides)
    return OnlineConfig(**base)


def _road(duration: float, dt: float = 0.1, length: float = 220.0,
          v0: float = 4.0, instances=()) -> Scenario:
    xs = np.linspace(-20.0, length, int((length + 20) / 4) + 1)
    ego_center = np.stack([xs, np.zeros_like(xs)], axis=1)
    adjacent = np.stack([xs, np.full_like(xs, -3.5)], axis=1)
    return Scenario(
        name="road",
        lanes=[Lane("lane0", ego_center, 3.5), Lane("lane1", adjacent, 3.5)],
        drivable=DrivableArea(ego_center.copy(), 3.25, 6.75),
        instances=list(instances),
        ego=EgoSpec(
            footprint=VEHICLE_FP,
            initial_state=EgoState(20.0, 0.0, 0.0, v0, 0.0, 0.0, 0.0),
            lane_id="lane0",
        ),
        duration=duration,
        dt=dt,
        bounds=StateControlBounds.default(),
    )


def parked(name: str, x: float, y: float) -> Instance:
    return Instance(name, "parked", VEHICLE_FP, Pose(x, y, 0.0))


def walker(name: str, x: float, y: float) -> Instance:
    return Instance(name, "pedestrian", PED_FP, Pose(x, y, 0.0))


def mover(name: str, x: float, y: float, vx: float) -> Instance:
    return Instance(name, "active", VEHICLE_FP, Pose(x, y, 0.0),
                    motion="constant_velocity", velocity=(vx, 0.0))


def scenario_one() -> Scenario:
    """One parked vehicle intruding from the left shoulder, one pedestrian on
    the shoulder, one active vehicle in the adjacent lane."""
    sc = _road(25.0, instances=[
        parked("parked0", 45.0, 2.55),
        walker("ped0", 70.0, 3.6),
        mover("active0", 10.0, -3.7, 5.0),
    ])
    sc.name = "scenario-1"
    return sc


def scenario_two() -> Scenario:
    """Two parked vehicles, two shoulder pedestrians, one active vehicle."""
    sc = _road(32.0, instances=[
        parked("parked0", 40.0, 2.55),
        parked("parked1", 75.0, 2.6),
        walker("ped0", 50.0, 3.6),
        walker("ped1", 78.0, 3.8),
        mover("active0", 10.0, -3.7, 5.0),
    ])
    sc.name = "scenario-2"
    return sc


def scenario_three() -> Scenario:
    """A pedestrian who just left the parked vehicle stands in the lane; the
    pass requires leaving the lane (relaxing lane keeping) at low speed."""
    sc = _road(30.0, instances=[
        parked("parked0", 45.0, 2.4),
        walker("ped_exit", 48.5, 0.55),
        walker("ped_far", 70.0, 3.8),
        mover("active0", 5.0, -3.7, 5.0),
    ])
    # narrower shoulder on the right: the swerve must stay tight
    sc.drivable = DrivableArea(sc.lanes[0].centerline.copy(), 3.25, 3.2)
    sc.name = "scenario-3"
    return sc


def empty_road(duration: float = 20.0) -> Scenario:
    sc = _road(duration)
    sc.name = "empty-road"
    return sc


def curved_single_lane(duration: float = 30.0) -> Scenario:
    """Curved single-lane road for the tracking comparison."""
    s = np.linspace(0.0, 260.0, 160)
    y = 10.0 * np.sin(s / 35.0)
    center = np.stack([s, y], axis=1)
    sc = Scenario(
        name="curved-lane",
        lanes=[Lane("lane0", center, 3.5)],
        drivable=DrivableArea(center.copy(), 3.25, 3.25),
        instances=[],
        ego=EgoSpec(
            footprint=VEHICLE_FP,
            initial_state=EgoState(10.0, 0.0, 0.0, 4.0, 0.0, 0.0, 0.0),
            lane_id="lane0",
        ),
        duration=duration,
        dt=0.1,
        bounds=StateControlBounds.default(),
    )
    return sc


PRESETS = {
    "scenario-1": scenario_one,
    "scenario-2": scenario_two,
    "scenario-3": scenario_three,
    "empty-road": empty_road,
    "curved-lane": curved_single_lane,
}
