"""Footprints, speed-dependent clearance regions, disk coverage, and distance
primitives.

Two distinct consumers share this module and must never be mixed up:

* the constraint path (barrier rows) uses the disk over-approximation, which is
  smooth in the vehicle state;
* the scoring path uses exact rectangle geometry (``rect_distance``,
  ``lane_infringement``), which is allowed to be non-smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Normalize an angle to (-pi, pi]."""
    wrapped = math.fmod(theta + math.pi, TWO_PI)
    if wrapped <= 0.0:
        wrapped += TWO_PI
    return wrapped - math.pi


@dataclass(frozen=True)
class Footprint:
    """Rectangular vehicle footprint; lengths in meters.

    ``rear_to_cog + front_to_cog == length`` so poses expressed at the center
    of gravity can be converted to the geometric center.
    """

    length: float
    width: float
    rear_to_cog: float
    front_to_cog: float

    def __post_init__(self):
        if self.length <= 0 or self.width <= 0:
            raise InvalidArgumentError("footprint length and width must be positive")
        if self.rear_to_cog <= 0 or self.front_to_cog <= 0:
            raise InvalidArgumentError("footprint CoG offsets must be positive")
        if abs(self.rear_to_cog + self.front_to_cog - self.length) > 1e-9:
            raise InvalidArgumentError("rear_to_cog + front_to_cog must equal length")

    @classmethod
    def centered(cls, length: float, width: float) -> "Footprint":
        return cls(length, width, length / 2.0, length / 2.0)

    @property
    def cog_to_center(self) -> float:
        """Signed distance from CoG to the geometric center, along heading."""
        return 0.5 * (self.front_to_cog - self.rear_to_cog)


@dataclass(frozen=True)
class SpeedLaw:
    """Affine clearance law h(v) = base + slope * v, both non-negative."""

    base: float
    slope: float

    def __post_init__(self):
        if self.base < 0 or self.slope < 0:
            raise InvalidArgumentError("clearance base and slope must be >= 0")

    def at(self, v: float) -> float:
        return self.base + self.slope * v


@dataclass(frozen=True)
class ClearanceSpec:
    """Per-side speed-dependent clearances (front, back, left, right)."""

    front: SpeedLaw
    back: SpeedLaw
    left: SpeedLaw
    right: SpeedLaw

    @classmethod
    def uniform(cls, base: float, slope: float) -> "ClearanceSpec":
        law = SpeedLaw(base, slope)
        return cls(law, law, law, law)

    @classmethod
    def zero(cls) -> "ClearanceSpec":
        return cls.uniform(0.0, 0.0)

    def at(self, v: float) -> tuple[float, float, float, float]:
        return (self.front.at(v), self.back.at(v), self.left.at(v), self.right.at(v))


@dataclass(frozen=True)
class Pose:
    """Planar pose; heading normalized to (-pi, pi]."""

    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "heading", wrap_angle(self.heading))


@dataclass(frozen=True)
class DiskCoverage:
    """A covering of a clearance rectangle by equal disks on its centerline."""

    disk_count: int
    radius: float
    centers: tuple[tuple[float, float], ...]


def min_radius(
    footprint: Footprint,
    h_f: float,
    h_b: float,
    h_l: float,
    h_r: float,
    z: int,
) -> float:
    """Minimum common radius for z centerline disks to cover the clearance
    rectangle (footprint inflated by the four side clearances)."""
    if z < 1:
        raise InvalidArgumentError(f"disk count must be >= 1, got {z}")
    if min(h_f, h_b, h_l, h_r) < 0:
        raise InvalidArgumentError("clearances must be >= 0")
    half_width = (footprint.width + h_l + h_r) / 2.0
    long_step = (footprint.length + h_f + h_b) / (2.0 * z)
    return math.hypot(half_width, long_step)


def disk_center_offsets(footprint: Footprint, h_f: float, h_b: float, z: int) -> list[float]:
    """Along-heading offsets of the z disk centers from the footprint center."""
    if z < 1:
        raise InvalidArgumentError(f"disk count must be >= 1, got {z}")
    total = footprint.length + h_f + h_b
    return [
        -footprint.length / 2.0 - h_b + total * (2 * j - 1) / (2.0 * z)
        for j in range(1, z + 1)
    ]


def disk_centers(
    pose: Pose,
    footprint: Footprint,
    h_f: float,
    h_b: float,
    z: int,
) -> list[tuple[float, float]]:
    """World positions of the covering disk centers.

    ``pose`` is the pose of the footprint's geometric center. Instances use
    their footprint with zero clearances.
    """
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    return [
        (pose.x + c * off, pose.y + s * off)
        for off in disk_center_offsets(footprint, h_f, h_b, z)
    ]


def coverage_for(
    pose: Pose,
    footprint: Footprint,
    clearance: ClearanceSpec,
    v: float,
    z: int,
) -> DiskCoverage:
    """Disk coverage of the clearance region at speed v."""
    h_f, h_b, h_l, h_r = clearance.at(v)
    r = min_radius(footprint, h_f, h_b, h_l, h_r, z)
    centers = tuple(disk_centers(pose, footprint, h_f, h_b, z))
    return DiskCoverage(z, r, centers)


def lateral_error(footprint: Footprint, h_f: float, h_b: float, h_l: float, h_r: float, z: int) -> float:
    """Lateral over-approximation of the disk cover beyond the rectangle side."""
    return min_radius(footprint, h_f, h_b, h_l, h_r, z) - (footprint.width + h_l + h_r) / 2.0


def optimize_coverage(
    footprint: Footprint,
    bounds: dict[str, tuple[float, float]],
    beta: float = 2.0,
    z_max: int = 10,
) -> tuple[int, float]:
    """Pick the disk count trading row count against lateral over-approximation.

    ``bounds`` maps side names (``f``, ``b``, ``l``, ``r``) to the (min, max)
    clearance attained over the speed range. The 4-D accumulated-error integral
    is evaluated by the midpoint rule; degenerate dimensions contribute unit
    measure so the error term survives for speed-independent regions. Returns
    the chosen count and the covering radius at the worst-case (max)
    clearances, which therefore covers the region at every speed.
    """
    if z_max < 1:
        raise InvalidArgumentError(f"z_max must be >= 1, got {z_max}")
    if beta < 0:
        raise InvalidArgumentError("beta must be >= 0")
    for side in "fblr":
        lo, hi = bounds[side]
        if lo > hi or lo < 0:
            raise InvalidArgumentError(f"bad clearance bounds for side {side!r}: {(lo, hi)}")

    mids = {side: 0.5 * (bounds[side][0] + bounds[side][1]) for side in "fblr"}
    volume = 1.0
    for side in "fblr":
        lo, hi = bounds[side]
        if hi > lo:
            volume *= hi - lo

    best_z, best_obj = 1, math.inf
    for z in range(1, z_max + 1):
        sigma = lateral_error(footprint, mids["f"], mids["b"], mids["l"], mids["r"], z)
        obj = z + beta * volume * sigma
        if obj < best_obj - 1e-12:
            best_z, best_obj = z, obj
    worst = min_radius(
        footprint,
        bounds["f"][1],
        bounds["b"][1],
        bounds["l"][1],
        bounds["r"][1],
        best_z,
    )
    return best_z, worst


# ---------------------------------------------------------------------------
# Exact rectangle geometry (scoring path only; non-smooth by design).
# ---------------------------------------------------------------------------


def rect_corners(pose: Pose, length: float, width: float) -> np.ndarray:
    """Corners (4, 2) of a rectangle centered at ``pose``, CCW order."""
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    hl, hw = length / 2.0, width / 2.0
    local = np.array([[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]])
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([pose.x, pose.y])


def _point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    if denom < 1e-18:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ ab / denom, 0.0, 1.0)
    proj = a + np.outer(t, ab)
    return np.linalg.norm(points - proj, axis=1)


def _sat_overlap(corners_a: np.ndarray, corners_b: np.ndarray) -> float | None:
    """Minimal translation extent if the rectangles overlap, else None."""
    min_overlap = math.inf
    for corners in (corners_a, corners_b):
        for i in range(2):
            edge = corners[(i + 1) % 4] - corners[i]
            axis = np.array([-edge[1], edge[0]])
            axis /= np.linalg.norm(axis)
            pa = corners_a @ axis
            pb = corners_b @ axis
            overlap = min(pa.max(), pb.max()) - max(pa.min(), pb.min())
            if overlap <= 0.0:
                return None
            min_overlap = min(min_overlap, overlap)
    return min_overlap


def rect_distance(
    pose_a: Pose,
    footprint_a: Footprint,
    pose_b: Pose,
    footprint_b: Footprint,
) -> float:
    """Signed distance between two oriented rectangles (centers at the poses).

    Positive separations are exact (vertex/edge minimum); overlap returns the
    negated separating-axis minimal-translation extent. Used only for
    violation scoring, never for barrier rows.
    """
    ca = rect_corners(pose_a, footprint_a.length, footprint_a.width)
    cb = rect_corners(pose_b, footprint_b.length, footprint_b.width)
    overlap = _sat_overlap(ca, cb)
    if overlap is not None:
        return -overlap
    dist = math.inf
    for pts, poly in ((ca, cb), (cb, ca)):
        for i in range(4):
            d = _point_segment_distance(pts, poly[i], poly[(i + 1) % 4])
            dist = min(dist, float(d.min()))
    return dist


# ---------------------------------------------------------------------------
# Lane / drivable-area infringement.
# ---------------------------------------------------------------------------


def _signed_offsets(points: np.ndarray, polyline: np.ndarray) -> np.ndarray:
    """Signed lateral offset of each point w.r.t. an oriented polyline.

    Positive to the left of the travel direction. Uses the nearest segment.
    """
    if polyline.shape[0] < 2:
        raise InvalidArgumentError("boundary polyline needs at least 2 points")
    seg_a = polyline[:-1]
    seg_b = polyline[1:]
    ab = seg_b - seg_a
    seg_len2 = np.einsum("ij,ij->i", ab, ab)
    if np.any(seg_len2 < 1e-18):
        raise InvalidArgumentError("boundary polyline has a zero-length segment")
    rel = points[:, None, :] - seg_a[None, :, :]
    t = np.clip(np.einsum("pij,ij->pi", rel, ab) / seg_len2, 0.0, 1.0)
    proj = seg_a[None, :, :] + t[:, :, None] * ab[None, :, :]
    d2 = np.sum((points[:, None, :] - proj) ** 2, axis=2)
    nearest = np.argmin(d2, axis=1)
    a = seg_a[nearest]
    tangent = ab[nearest] / np.sqrt(seg_len2[nearest])[:, None]
    rel_near = points - a
    cross = tangent[:, 0] * rel_near[:, 1] - tangent[:, 1] * rel_near[:, 0]
    return cross


def footprint_boundary_points(pose: Pose, footprint: Footprint, step: float = 0.05) -> np.ndarray:
    """Sampled boundary of the footprint rectangle (corners always included)."""
    corners = rect_corners(pose, footprint.length, footprint.width)
    pts = []
    for i in range(4):
        a, b = corners[i], corners[(i + 1) % 4]
        n = max(1, int(math.ceil(np.linalg.norm(b - a) / step)))
        for k in range(n):
            pts.append(a + (b - a) * (k / n))
    return np.asarray(pts)


def lane_infringement(
    pose: Pose,
    footprint: Footprint,
    left_boundary: np.ndarray,
    right_boundary: np.ndarray,
    d_max: float = 2.0,
) -> tuple[float, float]:
    """Per-side depth of the footprint beyond each oriented boundary.

    Both boundaries run along the travel direction; the drivable side is to
    the right of the left boundary and to the left of the right boundary.
    Returns (d_left, d_right), zero when fully inside. A footprint entirely
    beyond one boundary reports its width plus the centroid overshoot, clamped
    at 2 * d_max so downstream metrics stay in [0, 1].
    """
    left_boundary = np.asarray(left_boundary, dtype=float)
    right_boundary = np.asarray(right_boundary, dtype=float)
    pts = footprint_boundary_points(pose, footprint)
    centroid = np.array([[pose.x, pose.y]])

    # Signed offset > 0 means left of the boundary tangent.
    left_off = _signed_offsets(pts, left_boundary)
    right_off = _signed_offsets(pts, right_boundary)
    cap = 2.0 * d_max

    def depth(beyond: np.ndarray, centroid_beyond: float) -> float:
        if np.all(beyond > 0.0):
            return min(footprint.width + max(centroid_beyond, 0.0), cap)
        return min(float(np.maximum(beyond, 0.0).max()), cap)

    d_left = depth(left_off, float(_signed_offsets(centroid, left_boundary)[0]))
    d_right = depth(-right_off, float(-_signed_offsets(centroid, right_boundary)[0]))
    return d_left, d_right
