"""World model shared by controllers, scoring, and serialization: map,
traffic instances with simple motion models, ego configuration, timing and
bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import EgoState, ReferencePath, StateControlBounds, build_reference
from .errors import InvalidArgumentError
from .geometry import Footprint, Pose

INSTANCE_TYPES = ("pedestrian", "parked", "active")


def offset_polyline(centerline: np.ndarray, offset: float) -> np.ndarray:
    """Polyline shifted laterally (positive = left of travel direction)."""
    pts = np.asarray(centerline, dtype=float)
    tangents = np.gradient(pts, axis=0)
    norms = np.linalg.norm(tangents, axis=1, keepdims=True)
    tangents = tangents / np.maximum(norms, 1e-12)
    normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)
    return pts + offset * normals


@dataclass
class Lane:
    lane_id: str
    centerline: np.ndarray
    width: float

    def __post_init__(self):
        self.centerline = np.asarray(self.centerline, dtype=float)
        if self.centerline.ndim != 2 or self.centerline.shape[0] < 2:
            raise InvalidArgumentError(f"lane {self.lane_id!r} centerline needs >= 2 points")
        if self.width <= 0:
            raise InvalidArgumentError(f"lane {self.lane_id!r} width must be positive")

    @property
    def left_boundary(self) -> np.ndarray:
        return offset_polyline(self.centerline, self.width / 2.0)

    @property
    def right_boundary(self) -> np.ndarray:
        return offset_polyline(self.centerline, -self.width / 2.0)


@dataclass
class DrivableArea:
    """Corridor around a spine polyline; polygon kept for rendering."""

    spine: np.ndarray
    left_extent: float
    right_extent: float

    def __post_init__(self):
        self.spine = np.asarray(self.spine, dtype=float)
        if self.left_extent <= 0 or self.right_extent <= 0:
            raise InvalidArgumentError("drivable extents must be positive")

    @property
    def left_boundary(self) -> np.ndarray:
        return offset_polyline(self.spine, self.left_extent)

    @property
    def right_boundary(self) -> np.ndarray:
        return offset_polyline(self.spine, -self.right_extent)

    @property
    def polygon(self) -> np.ndarray:
        return np.vstack([self.left_boundary, self.right_boundary[::-1]])


@dataclass(frozen=True)
class InstanceSample:
    pose: Pose
    speed: float
    velocity: tuple[float, float]


@dataclass
class Instance:
    instance_id: str
    kind: str  # pedestrian | parked | active
    footprint: Footprint
    pose: Pose
    motion: str = "static"  # static | constant_velocity | scripted
    velocity: tuple[float, float] = (0.0, 0.0)
    script: list[tuple[float, float, float, float, float]] = field(default_factory=list)
    # script rows: (t, x, y, heading, speed)

    def __post_init__(self):
        if self.kind not in INSTANCE_TYPES:
            raise InvalidArgumentError(f"unknown instance kind {self.kind!r}")
        if self.motion not in ("static", "constant_velocity", "scripted"):
            raise InvalidArgumentError(f"unknown motion model {self.motion!r}")
        if self.motion == "scripted" and len(self.script) < 2:
            raise InvalidArgumentError("scripted motion needs >= 2 samples")

    def state_at(self, t: float) -> InstanceSample:
        if self.motion == "static":
            return InstanceSample(self.pose, 0.0, (0.0, 0.0))
        if self.motion == "constant_velocity":
            vx, vy = self.velocity
            return InstanceSample(
                Pose(self.pose.x + vx * t, self.pose.y + vy * t, self.pose.heading),
                math.hypot(vx, vy),
                (vx, vy),
            )
        rows = self.script
        if t <= rows[0][0]:
            r = rows[0]
            return InstanceSample(Pose(r[1], r[2], r[3]), r[4], _script_velocity(rows, 0))
        if t >= rows[-1][0]:
            r = rows[-1]
            return InstanceSample(Pose(r[1], r[2], r[3]), r[4], _script_velocity(rows, len(rows) - 2))
        for i in range(len(rows) - 1):
            t0, t1 = rows[i][0], rows[i + 1][0]
            if t0 <= t <= t1:
                w = (t - t0) / (t1 - t0) if t1 > t0 else 0.0
                a, b = rows[i], rows[i + 1]
                return InstanceSample(
                    Pose(a[1] + w * (b[1] - a[1]), a[2] + w * (b[2] - a[2]),
                         a[3] + w * (b[3] - a[3])),
                    a[4] + w * (b[4] - a[4]),
                    _script_velocity(rows, i),
                )
        raise InvalidArgumentError("script does not cover the requested time")


def _script_velocity(rows, i) -> tuple[float, float]:
    a, b = rows[i], rows[i + 1]
    dt = b[0] - a[0]
    if dt <= 0:
        return (0.0, 0.0)
    return ((b[1] - a[1]) / dt, (b[2] - a[2]) / dt)


@dataclass
class EgoSpec:
    footprint: Footprint
    initial_state: EgoState
    lane_id: str

    @property
    def l_r(self) -> float:
        return self.footprint.rear_to_cog

    @property
    def l_f(self) -> float:
        return self.footprint.front_to_cog


@dataclass
class Scenario:
    name: str
    lanes: list[Lane]
    drivable: DrivableArea
    instances: list[Instance]
    ego: EgoSpec
    duration: float
    dt: float
    bounds: StateControlBounds
    rule_parameters: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        if self.duration <= self.dt or self.dt <= 0:
            raise InvalidArgumentError("need duration > dt > 0")
        if self.ego.lane_id not in {l.lane_id for l in self.lanes}:
            raise InvalidArgumentError(f"ego references unknown lane {self.ego.lane_id!r}")

    def lane(self, lane_id: str) -> Lane:
        for lane in self.lanes:
            if lane.lane_id == lane_id:
                return lane
        raise InvalidArgumentError(f"unknown lane {lane_id!r}")

    @property
    def ego_lane(self) -> Lane:
        return self.lane(self.ego.lane_id)

    def reference_path(self, curvature_smoothing: float | None = None) -> ReferencePath:
        return build_reference(self.ego_lane.centerline, curvature_smoothing)

    def instance_states(self, t: float) -> dict[str, InstanceSample]:
        return {inst.instance_id: inst.state_at(t) for inst in self.instances}

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dt))
