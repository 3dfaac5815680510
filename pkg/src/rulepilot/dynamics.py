"""Curvilinear vehicle model, RK4 integration, reference-path bookkeeping, and
the discrete predictive model used by the receding-horizon controller.

State x = (s, d, mu, v, a, delta, omega): progress along the reference path,
lateral error, local heading error, speed, acceleration, steering angle and
steering rate. Controls u = (jerk, steering acceleration); both enter the
dynamics linearly, control-affine form f(x) + g(x) u.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline, make_smoothing_spline

from .errors import InvalidArgumentError, SingularStateError
from .geometry import Pose, wrap_angle

SINGULARITY_GUARD = 1e-6


@dataclass(frozen=True)
class EgoState:
    s: float
    d: float
    mu: float
    v: float
    a: float
    delta: float
    omega: float

    def to_array(self) -> np.ndarray:
        return np.array([self.s, self.d, self.mu, self.v, self.a, self.delta, self.omega])

    @classmethod
    def from_array(cls, arr) -> "EgoState":
        return cls(*(float(x) for x in arr))


@dataclass(frozen=True)
class Control:
    jerk: float
    steer_accel: float

    def to_array(self) -> np.ndarray:
        return np.array([self.jerk, self.steer_accel])


@dataclass(frozen=True)
class StateControlBounds:
    v_min: float
    v_max: float
    a_min: float
    a_max: float
    jerk_min: float
    jerk_max: float
    delta_min: float
    delta_max: float
    omega_min: float
    omega_max: float
    steer_accel_min: float
    steer_accel_max: float

    def __post_init__(self):
        pairs = [
            (self.v_min, self.v_max),
            (self.a_min, self.a_max),
            (self.jerk_min, self.jerk_max),
            (self.delta_min, self.delta_max),
            (self.omega_min, self.omega_max),
            (self.steer_accel_min, self.steer_accel_max),
        ]
        if any(lo >= hi for lo, hi in pairs):
            raise InvalidArgumentError("each bound must satisfy min < max")

    @classmethod
    def default(cls) -> "StateControlBounds":
        return cls(
            v_min=0.0, v_max=10.0,
            a_min=-3.5, a_max=3.5,
            jerk_min=-4.0, jerk_max=4.0,
            delta_min=-1.0, delta_max=1.0,
            omega_min=-0.5, omega_max=0.5,
            steer_accel_min=-2.0, steer_accel_max=2.0,
        )


def slip_angle(delta: float, l_r: float, l_f: float) -> float:
    """Kinematic side-slip angle beta at the CoG for steering angle delta."""
    return math.atan(l_r / (l_r + l_f) * math.tan(delta))


def derivative(
    state: EgoState,
    control: Control,
    kappa: float,
    l_r: float = 2.0,
    l_f: float = 2.0,
) -> np.ndarray:
    """Continuous-time state derivative f(x) + g(x) u at curvature kappa."""
    denom = 1.0 - state.d * kappa
    if denom < SINGULARITY_GUARD:
        raise SingularStateError(state.d, kappa)
    beta = slip_angle(state.delta, l_r, l_f)
    heading = state.mu + beta
    s_dot = state.v * math.cos(heading) / denom
    return np.array([
        s_dot,
        state.v * math.sin(heading),
        state.v / l_r * math.sin(beta) - kappa * s_dot,
        state.a,
        control.jerk,
        state.omega,
        control.steer_accel,
    ])


class ReferencePath:
    """Arc-length parameterized reference path with spline-regressed curvature.

    Built from an ordered point sequence. Positions come from an interpolating
    cubic spline in arc length; curvature is regressed separately (optionally
    smoothed) so that kappa(s) and its derivatives, needed by the constraint
    chains, are themselves smooth.
    """

    def __init__(self, points: np.ndarray, curvature_smoothing: float | None = None):
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 4:
            raise InvalidArgumentError("reference path needs >= 4 planar points")
        deltas = np.diff(points, axis=0)
        seg = np.linalg.norm(deltas, axis=1)
        if np.any(seg < 1e-12):
            raise InvalidArgumentError("reference path has duplicate consecutive points")
        s = np.concatenate([[0.0], np.cumsum(seg)])
        self.points = points
        self.s_table = s
        self.length = float(s[-1])
        self._x = CubicSpline(s, points[:, 0])
        self._y = CubicSpline(s, points[:, 1])

        dx, dy = self._x(s, 1), self._y(s, 1)
        ddx, ddy = self._x(s, 2), self._y(s, 2)
        speed2 = dx * dx + dy * dy
        kappa_samples = (dx * ddy - dy * ddx) / np.power(speed2, 1.5)
        if curvature_smoothing is not None:
            self._kappa = make_smoothing_spline(s, kappa_samples, lam=curvature_smoothing)
        else:
            self._kappa = CubicSpline(s, kappa_samples)
        self._kappa_d = [self._kappa.derivative(k) for k in (1, 2, 3)]
        self._kj_cache: dict[float, tuple[float, float, float, float]] = {}

        # uniform table for the predictive-model hot path (linear in s, with
        # the exact segment slope as its derivative so adjoints stay consistent)
        self._table_ds = 0.25
        grid = np.arange(0.0, self.length + self._table_ds, self._table_ds)
        kap = self._kappa(np.clip(grid, 0.0, self.length))
        self._kap_table = kap
        self._kap_slope = np.diff(kap) / self._table_ds

    def clamp_s(self, s: float) -> float:
        return min(max(s, 0.0), self.length)

    def kappa(self, s: float) -> float:
        return float(self._kappa(self.clamp_s(s)))

    def kappa_jets(self, s: float) -> tuple[float, float, float, float]:
        """kappa and its first three derivatives w.r.t. arc length at s.

        Cached per arc position: one state's row assembly hits the same s
        dozens of times across chain sweeps and control variants.
        """
        cached = self._kj_cache.get(s)
        if cached is not None:
            return cached
        sc = self.clamp_s(s)
        out = (
            float(self._kappa(sc)),
            float(self._kappa_d[0](sc)),
            float(self._kappa_d[1](sc)),
            float(self._kappa_d[2](sc)),
        )
        if len(self._kj_cache) > 65536:
            self._kj_cache.clear()
        self._kj_cache[s] = out
        return out

    def kappa_fast(self, s: float) -> tuple[float, float]:
        """(kappa, dkappa/ds) from the uniform table; piecewise linear."""
        u = min(max(s, 0.0), self.length) / self._table_ds
        i = min(int(u), self._kap_slope.size - 1)
        slope = self._kap_slope[i]
        return self._kap_table[i] + (u - i) * self._table_ds * slope, slope

    def position(self, s: float) -> tuple[float, float]:
        sc = self.clamp_s(s)
        return float(self._x(sc)), float(self._y(sc))

    def tangent_angle(self, s: float) -> float:
        sc = self.clamp_s(s)
        return math.atan2(float(self._y(sc, 1)), float(self._x(sc, 1)))

    def to_global(self, s: float, d: float, mu: float) -> Pose:
        """Global CoG pose of a curvilinear state sample."""
        px, py = self.position(s)
        phi = self.tangent_angle(s)
        return Pose(px - d * math.sin(phi), py + d * math.cos(phi), wrap_angle(phi + mu))

    def project(self, x: float, y: float) -> tuple[float, float]:
        """(s, d) of the closest path point to (x, y); coarse table + Newton."""
        d2 = (self.points[:, 0] - x) ** 2 + (self.points[:, 1] - y) ** 2
        i = int(np.argmin(d2))
        lo = self.s_table[max(i - 1, 0)]
        hi = self.s_table[min(i + 1, len(self.s_table) - 1)]
        grid = np.linspace(lo, hi, 32)
        gx, gy = self._x(grid), self._y(grid)
        s = float(grid[int(np.argmin((gx - x) ** 2 + (gy - y) ** 2))])
        for _ in range(12):
            ex = float(self._x(s)) - x
            ey = float(self._y(s)) - y
            dx1, dy1 = float(self._x(s, 1)), float(self._y(s, 1))
            dx2, dy2 = float(self._x(s, 2)), float(self._y(s, 2))
            g = ex * dx1 + ey * dy1
            hess = dx1 * dx1 + dy1 * dy1 + ex * dx2 + ey * dy2
            if abs(hess) < 1e-12:
                break
            step = g / hess
            s = self.clamp_s(s - step)
            if abs(step) < 1e-12:
                break
        phi = self.tangent_angle(s)
        px, py = self.position(s)
        d = -(x - px) * math.sin(phi) + (y - py) * math.cos(phi)
        return s, d


def build_reference(points, curvature_smoothing: float | None = None) -> ReferencePath:
    return ReferencePath(np.asarray(points, dtype=float), curvature_smoothing)


def integrate_step(
    state: EgoState,
    control: Control,
    path: ReferencePath,
    dt: float,
    l_r: float = 2.0,
    l_f: float = 2.0,
) -> EgoState:
    """Classical RK4 step with the control held constant over the interval.

    Curvature is re-evaluated from the current progress at every stage.
    """
    if dt <= 0:
        raise InvalidArgumentError("dt must be positive")

    def f(arr: np.ndarray) -> np.ndarray:
        st = EgoState.from_array(arr)
        return derivative(st, control, path.kappa(st.s), l_r, l_f)

    x0 = state.to_array()
    k1 = f(x0)
    k2 = f(x0 + 0.5 * dt * k1)
    k3 = f(x0 + 0.5 * dt * k2)
    k4 = f(x0 + dt * k3)
    return EgoState.from_array(x0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


def adm_predict(
    state: EgoState,
    control: Control,
    kappa: float,
    dt: float,
    l_r: float = 2.0,
    l_f: float = 2.0,
) -> EgoState:
    """First-order series-discretized predictive step.

    Kinematic rows advance by their current rates; the v and delta rows keep
    the half-step control terms of the expansion.
    """
    if dt <= 0:
        raise InvalidArgumentError("dt must be positive")
    denom = 1.0 - state.d * kappa
    if denom < SINGULARITY_GUARD:
        raise SingularStateError(state.d, kappa)
    beta = slip_angle(state.delta, l_r, l_f)
    heading = state.mu + beta
    s_dot = state.v * math.cos(heading) / denom
    return EgoState(
        s=state.s + s_dot * dt,
        d=state.d + state.v * math.sin(heading) * dt,
        mu=state.mu + (state.v / l_r * math.sin(beta) - kappa * s_dot) * dt,
        v=state.v + state.a * dt + 0.5 * control.jerk * dt * dt,
        a=state.a + control.jerk * dt,
        delta=state.delta + state.omega * dt + 0.5 * control.steer_accel * dt * dt,
        omega=state.omega + control.steer_accel * dt,
    )


def update_reference_index(
    position: tuple[float, float],
    points: np.ndarray,
    i_prev: int | None,
    gamma: float = 0.5,
) -> int:
    """Reference point index update.

    Advance by one while within gamma of the current point, otherwise snap to
    the globally closest point. ``i_prev is None`` applies the initial rule
    (global closest). Clamps at the final index so callers can detect path
    exhaustion.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] == 0:
        raise InvalidArgumentError("reference points must be a non-empty (N, 2) array")
    if gamma <= 0:
        raise InvalidArgumentError("gamma must be positive")
    pos = np.asarray(position, dtype=float)
    n = points.shape[0]
    if i_prev is None:
        return int(np.argmin(np.linalg.norm(points - pos, axis=1)))
    if not 0 <= i_prev < n:
        raise InvalidArgumentError(f"i_prev out of range: {i_prev}")
    if np.linalg.norm(pos - points[i_prev]) <= gamma:
        return min(i_prev + 1, n - 1)
    return int(np.argmin(np.linalg.norm(points - pos, axis=1)))
