"""Vehicle model: derivative, RK4 integration, predictive step, reference path."""

import math

import numpy as np
import pytest

from rulepilot.dynamics import (
    Control,
    EgoState,
    adm_predict,
    build_reference,
    derivative,
    integrate_step,
    slip_angle,
    update_reference_index,
)
from rulepilot.errors import InvalidArgumentError, SingularStateError

ZERO = EgoState(0, 0, 0, 0, 0, 0, 0)
NO_U = Control(0.0, 0.0)


def straight_path(length=200.0, n=50):
    xs = np.linspace(0.0, length, n)
    return build_reference(np.stack([xs, np.zeros_like(xs)], axis=1))


class TestDerivative:
    def test_equilibrium(self):
        assert np.allclose(derivative(ZERO, NO_U, 0.0), np.zeros(7))

    def test_unit_speed_straight(self):
        st = EgoState(0, 0, 0, 1.0, 0, 0, 0)
        dx = derivative(st, NO_U, 0.0)
        assert dx[0] == pytest.approx(1.0)
        assert np.allclose(dx[1:], 0.0)

    def test_small_steer_linearization(self):
        # mu_dot ~ v * beta / l_r to first order in delta
        v, delta, l_r, l_f = 1.0, 1e-4, 2.0, 2.0
        st = EgoState(0, 0, 0, v, 0, delta, 0)
        dx = derivative(st, NO_U, 0.0, l_r, l_f)
        beta = slip_angle(delta, l_r, l_f)
        assert dx[2] == pytest.approx(v * beta / l_r, rel=1e-6)

    def test_control_rows_linear(self):
        st = EgoState(1, 0.2, 0.1, 3, 0.5, 0.1, 0.05)
        d0 = derivative(st, Control(0, 0), 0.01)
        d1 = derivative(st, Control(2.0, -1.0), 0.01)
        assert np.allclose(d1 - d0, [0, 0, 0, 0, 2.0, 0, -1.0])

    def test_singularity_raises(self):
        st = EgoState(0, 10.0, 0, 1, 0, 0, 0)
        with pytest.raises(SingularStateError):
            derivative(st, NO_U, 0.1)


class TestIntegrateStep:
    def test_fixed_point(self):
        path = straight_path()
        nxt = integrate_step(ZERO, NO_U, path, 0.1)
        assert np.allclose(nxt.to_array(), np.zeros(7), atol=1e-12)

    def test_constant_jerk_closed_form(self):
        # straight path: v(t) = v0 + a0 t + c t^2 / 2, exact for RK4
        path = straight_path()
        st = EgoState(0, 0, 0, 2.0, 0.5, 0, 0)
        c = 1.5
        nxt = integrate_step(st, Control(c, 0.0), path, 0.2)
        assert nxt.v == pytest.approx(2.0 + 0.5 * 0.2 + 0.5 * c * 0.04, abs=1e-12)
        assert nxt.a == pytest.approx(0.5 + c * 0.2, abs=1e-12)

    def test_richardson_fourth_order(self):
        # halving dt shrinks error ~16x on a curved path
        theta = np.linspace(0, 0.8, 80)
        radius = 40.0
        pts = np.stack([radius * np.sin(theta), radius * (1 - np.cos(theta))], axis=1)
        path = build_reference(pts)
        st = EgoState(5.0, 0.2, 0.05, 4.0, 0.3, 0.05, 0.02)
        u = Control(0.4, -0.1)

        def propagate(dt, steps):
            x = st
            for _ in range(steps):
                x = integrate_step(x, u, path, dt)
            return x.to_array()

        ref = propagate(0.4 / 64, 64)
        err_h = np.linalg.norm(propagate(0.4 / 4, 4) - ref)
        err_h2 = np.linalg.norm(propagate(0.4 / 8, 8) - ref)
        assert err_h / err_h2 == pytest.approx(16.0, rel=0.35)

    def test_bad_dt(self):
        with pytest.raises(InvalidArgumentError):
            integrate_step(ZERO, NO_U, straight_path(), 0.0)


class TestAdmPredict:
    def test_zero_fixed_point(self):
        nxt = adm_predict(ZERO, NO_U, 0.0, 0.1)
        assert np.allclose(nxt.to_array(), np.zeros(7))

    def test_speed_row_hand_value(self):
        st = EgoState(0, 0, 0, 2.0, 1.0, 0, 0)
        nxt = adm_predict(st, NO_U, 0.0, 0.1)
        assert nxt.v == pytest.approx(2.1, abs=1e-12)

    def test_half_step_control_terms(self):
        st = EgoState(0, 0, 0, 2.0, 0.0, 0.1, 0.0)
        u = Control(2.0, 1.0)
        nxt = adm_predict(st, u, 0.0, 0.1)
        assert nxt.v == pytest.approx(2.0 + 0.5 * 2.0 * 0.01, abs=1e-12)
        assert nxt.delta == pytest.approx(0.1 + 0.5 * 1.0 * 0.01, abs=1e-12)
        assert nxt.a == pytest.approx(0.2)
        assert nxt.omega == pytest.approx(0.1)

    def test_consistency_with_derivative(self):
        # (adm(x, dt) - x)/dt -> f(x) + g(x) u componentwise
        rng = np.random.default_rng(2)
        for _ in range(100):
            st = EgoState(
                s=rng.uniform(0, 50), d=rng.uniform(-1, 1), mu=rng.uniform(-0.3, 0.3),
                v=rng.uniform(0, 8), a=rng.uniform(-2, 2), delta=rng.uniform(-0.5, 0.5),
                omega=rng.uniform(-0.3, 0.3))
            u = Control(rng.uniform(-3, 3), rng.uniform(-1, 1))
            kappa = rng.uniform(-0.05, 0.05)
            f = derivative(st, u, kappa)
            dt = 1e-6
            fd = (adm_predict(st, u, kappa, dt).to_array() - st.to_array()) / dt
            assert np.allclose(fd, f, atol=1e-4)

    def test_adm_vs_rk4_second_order_error(self):
        path = straight_path()
        st = EgoState(5.0, 0.3, 0.1, 4.0, 0.5, 0.2, 0.1)
        u = Control(1.0, 0.5)
        kappa = path.kappa(st.s)

        def err(dt):
            fine = st
            n = 64
            for _ in range(n):
                fine = integrate_step(fine, u, path, dt / n)
            rough = adm_predict(st, u, kappa, dt)
            return np.linalg.norm(rough.to_array() - fine.to_array())

        ratio = err(0.2) / err(0.1)
        assert ratio == pytest.approx(4.0, rel=0.4)


class TestReferenceIndex:
    POINTS = np.stack([np.linspace(0, 10, 11), np.zeros(11)], axis=1)

    def test_within_gamma_advances(self):
        assert update_reference_index((3.0, 0.1), self.POINTS, 3, gamma=0.5) == 4

    def test_far_snaps_to_closest(self):
        assert update_reference_index((7.1, 0.0), self.POINTS, 2, gamma=0.5) == 7

    def test_initial_rule_global_closest(self):
        assert update_reference_index((5.4, 2.0), self.POINTS, None) == 5

    def test_clamps_at_end(self):
        assert update_reference_index((10.0, 0.0), self.POINTS, 10, gamma=0.5) == 10

    def test_result_within_gamma_or_global_min(self):
        rng = np.random.default_rng(9)
        for _ in range(200):
            pos = (rng.uniform(-2, 12), rng.uniform(-3, 3))
            i_prev = int(rng.integers(0, 11))
            gamma = rng.uniform(0.1, 2.0)
            i = update_reference_index(pos, self.POINTS, i_prev, gamma)
            dist_prev = np.linalg.norm(np.array(pos) - self.POINTS[i_prev])
            global_min = int(np.argmin(np.linalg.norm(self.POINTS - np.array(pos), axis=1)))
            assert (dist_prev <= gamma and i == min(i_prev + 1, 10)) or i == global_min

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            update_reference_index((0, 0), np.zeros((0, 2)), None)


class TestBuildReference:
    def test_collinear_zero_curvature(self):
        path = straight_path()
        for s in np.linspace(1, 150, 20):
            assert abs(path.kappa(float(s))) < 1e-6

    def test_circle_curvature(self):
        R = 25.0
        theta = np.linspace(0, 2.0, 120)
        pts = np.stack([R * np.sin(theta), R * (1 - np.cos(theta))], axis=1)
        path = build_reference(pts)
        mid = np.linspace(0.25 * path.length, 0.75 * path.length, 20)
        for s in mid:
            assert path.kappa(float(s)) == pytest.approx(1.0 / R, rel=0.01)

    def test_clothoid_linear_curvature(self):
        # kappa(s) = c * s; integrate heading numerically for sample points
        c = 1.0 / 400.0
        s_grid = np.linspace(0, 60, 400)
        heading = 0.5 * c * s_grid**2
        xs = np.concatenate([[0], np.cumsum(np.cos(heading[:-1]) * np.diff(s_grid))])
        ys = np.concatenate([[0], np.cumsum(np.sin(heading[:-1]) * np.diff(s_grid))])
        path = build_reference(np.stack([xs, ys], axis=1))
        for s in np.linspace(0.3 * path.length, 0.7 * path.length, 15):
            assert path.kappa(float(s)) == pytest.approx(c * s, rel=0.02)

    def test_too_few_points(self):
        with pytest.raises(InvalidArgumentError):
            build_reference(np.array([[0, 0], [1, 0], [2, 0]]))

    def test_global_roundtrip(self):
        path = straight_path()
        pose = path.to_global(10.0, 0.5, 0.1)
        assert pose.x == pytest.approx(10.0, abs=1e-9)
        assert pose.y == pytest.approx(0.5, abs=1e-9)
        assert pose.heading == pytest.approx(0.1, abs=1e-9)
        s, d = path.project(pose.x, pose.y)
        assert s == pytest.approx(10.0, abs=0.01)
        assert d == pytest.approx(0.5, abs=1e-6)


class TestControlRowsExact:
    def test_accel_and_steer_rate_integrate_controls_linearly(self):
        """The a and omega rows are pure integrators of the controls, so a
        fixed-step integration reproduces them exactly."""
        path = straight_path()
        st = EgoState(5.0, 0.2, 0.05, 3.0, 0.4, 0.1, 0.05)
        u = Control(1.7, -0.9)
        nxt = integrate_step(st, u, path, 0.25)
        assert nxt.a == pytest.approx(0.4 + 1.7 * 0.25, abs=1e-12)
        assert nxt.omega == pytest.approx(0.05 - 0.9 * 0.25, abs=1e-12)
        assert len(nxt.to_array()) == 7
