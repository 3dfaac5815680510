"""Barrier chains, Lyapunov rows, finite-difference self-checks, and the
closed-loop invariance/decay properties on the double integrator."""

import math

import numpy as np
import pytest

from rulepilot.cbf_clf import (
    BarrierSpec,
    ClfLyapunov,
    clf_row,
    evaluate_chain,
    fd_self_check,
    hocbf_row,
    lowest_control_level,
    psi_sequence,
)
from rulepilot.errors import InvalidArgumentError
from rulepilot.geometry import ClearanceSpec, Footprint
from rulepilot.jets import Jet
from rulepilot.solvers import solve_qp
from rulepilot.vehicle_constraints import (
    ClfSpec,
    StepContext,
    bound_barrier,
    clearance_barrier,
    clf_tracking_row,
    containment_barrier,
    lat_accel_barrier,
)

from support import (
    double_integrator_field,
    gentle_curve_path,
    position_clf,
    random_vehicle_states,
    rows_to_qp,
    simulate_double_integrator,
    single_integrator_field,
    speed_tracking_clf,
    wall_barrier,
)

FP = Footprint.centered(4.0, 1.8)


class TestHandRows:
    def test_relative_degree_one_integrator(self):
        # b = x, x' = u, k = 1: row u + x >= 0
        bar = BarrierSpec("b", 1, (1.0,), single_integrator_field,
                          lambda jets: jets[0], n_controls=1)
        row = hocbf_row(bar, [2.5])
        assert row.coeffs[0] == pytest.approx(1.0)
        assert row.constant == pytest.approx(2.5)
        assert row.sense == "ge"

    def test_double_integrator_hand_chain(self):
        # b = x1, k = (1, 1): psi_1 = x2 + x1; row u + 2 x2 + x1 >= 0
        bar = BarrierSpec("b", 2, (1.0, 1.0), double_integrator_field,
                          lambda jets: jets[0], n_controls=1)
        x = [1.3, -0.4]
        seq = psi_sequence(bar, x)
        assert seq.values[0] == pytest.approx(1.3)
        assert seq.values[1] == pytest.approx(-0.4 + 1.3)
        row = hocbf_row(bar, x)
        assert row.coeffs[0] == pytest.approx(1.0)
        assert row.constant == pytest.approx(2 * (-0.4) + 1.3)

    def test_constant_barrier_always_feasible(self):
        bar = BarrierSpec("b", 1, (2.0,), double_integrator_field,
                          lambda jets: Jet(5.0), n_controls=1)
        row = hocbf_row(bar, [0.0, 0.0])
        assert row.coeffs[0] == pytest.approx(0.0)
        assert row.constant == pytest.approx(2.0 * 5.0)

    def test_relax_attaches_key(self):
        bar = BarrierSpec("b", 1, (1.0,), single_integrator_field,
                          lambda jets: jets[0], n_controls=1, rule_id="r9")
        assert hocbf_row(bar, [1.0], relax=True).relax_key == "r9"
        assert hocbf_row(bar, [1.0], relax=False).relax_key is None

    def test_membership_warning(self):
        bar = BarrierSpec("b", 2, (1.0, 1.0), double_integrator_field,
                          lambda jets: jets[0], n_controls=1)
        assert not hocbf_row(bar, [1.0, 0.0]).warning
        assert hocbf_row(bar, [-0.5, 0.0]).warning  # outside C_1


class TestClfRows:
    def test_zero_error_state(self):
        clf = speed_tracking_clf(v_des=3.0, epsilon=0.5)
        row, v_val = clf_row(clf, [0.0, 3.0])
        assert v_val == pytest.approx(0.0)
        assert row.constant == pytest.approx(0.0)
        assert row.sense == "le"
        assert row.relax_key == "clf"

    def test_hand_gradient_speed_term(self):
        # V = (a + k1 (v - vd))^2 on the vehicle: u_jerk coeff = 2 q, drift 2 q k1 a
        path = gentle_curve_path()
        spec = ClfSpec(v_des=4.0, k_speed=0.7, c_speed=1.0, c_lat=0.0,
                       lam1=1.0, lam2=2.0, epsilon=0.5)
        from rulepilot.dynamics import EgoState
        st = EgoState(10.0, 0.0, 0.0, 5.0, 0.4, 0.0, 0.0)
        ctx = StepContext.at(st, path, 2.0, 2.0)
        row, v_val = clf_tracking_row(ctx, spec)
        q = st.a + 0.7 * (st.v - 4.0)
        assert v_val == pytest.approx(q * q)
        assert row.coeffs[0] == pytest.approx(2.0 * q, rel=1e-9)
        assert row.coeffs[1] == pytest.approx(0.0, abs=1e-12)
        assert row.constant == pytest.approx(2.0 * q * 0.7 * st.a + 0.5 * q * q, rel=1e-9)

    def test_scaling_linearity(self):
        clf1 = position_clf(1.0, 0.5)
        clf4 = ClfLyapunov(
            field=double_integrator_field,
            expr=lambda jets: (jets[1] + 1.0 * jets[0]).sq() * 4.0,
            epsilon=0.5,
            n_controls=1,
        )
        x = [1.2, -0.3]
        r1, v1 = clf_row(clf1, x)
        r4, v4 = clf_row(clf4, x)
        assert v4 == pytest.approx(4 * v1)
        assert r4.coeffs[0] == pytest.approx(4 * r1.coeffs[0])
        assert r4.constant == pytest.approx(4 * r1.constant)


class TestFiniteDifferenceChecks:
    """Criterion-level: analytic rows match finite differences to 1e-4."""

    def test_vehicle_families_random_states(self):
        rng = np.random.default_rng(42)
        path = gentle_curve_path()
        clearance = ClearanceSpec.uniform(0.3, 0.13)
        failures = []
        for st in random_vehicle_states(rng, 25):
            pose = path.to_global(st.s, st.d, st.mu)
            x_ext = [pose.x, pose.y, pose.heading, st.v, st.a, st.delta, st.omega,
                     pose.x + rng.uniform(3, 12), pose.y + rng.uniform(-3, 3),
                     rng.uniform(-2, 2), rng.uniform(-2, 2)]
            bar = clearance_barrier(FP, clearance, 3, 2, 1.3, (0.8, 0.8, 0.8), 2.0, 2.0)
            errs = fd_self_check(bar, x_ext)
            failures += [(bar.name, k, e) for k, e in errs.items() if e > 1e-4]

            x = st.to_array()
            for bar in (
                containment_barrier(path, 0.6, 1.0, True, (1.0, 1.0, 1.0), 2.0, 2.0),
                containment_barrier(path, 0.6, -1.0, False, (1.0, 1.0, 1.0), 2.0, 2.0),
                bound_barrier(path, 3, 7.0, True, 2, (1.0, 1.0), 2.0, 2.0),
                bound_barrier(path, 4, 3.5, True, 1, (1.0,), 2.0, 2.0),
                bound_barrier(path, 5, 1.0, True, 2, (1.0, 1.0), 2.0, 2.0),
                lat_accel_barrier(path, 1.75, 1.0, (1.0, 1.0), 2.0, 2.0),
            ):
                errs = fd_self_check(bar, x)
                failures += [(bar.name, k, e) for k, e in errs.items() if e > 1e-4]
        assert not failures, failures[:8]

    def test_speed_independent_clearance_has_degree_three(self):
        bar = clearance_barrier(FP, ClearanceSpec.zero(), 3, 2, 1.3,
                                (0.8, 0.8, 0.8), 2.0, 2.0)
        assert bar.rel_degree == 3
        x = [0.0, 0.0, 0.1, 4.0, 0.3, 0.05, 0.02, 8.0, 1.0, 0.0, 0.0]
        assert lowest_control_level(bar, x) == 3
        chain = evaluate_chain(bar, x)
        assert abs(chain.lg[0]) > 1e-6 and abs(chain.lg[1]) > 1e-6

    def test_speed_dependent_clearance_has_degree_two(self):
        bar = clearance_barrier(FP, ClearanceSpec.uniform(0.3, 0.13), 3, 2, 1.3,
                                (0.8, 0.8, 0.8), 2.0, 2.0)
        assert bar.rel_degree == 2
        x = [0.0, 0.0, 0.1, 4.0, 0.3, 0.05, 0.02, 8.0, 1.0, 0.0, 0.0]
        assert lowest_control_level(bar, x) == 2
        chain = evaluate_chain(bar, x)
        assert abs(chain.lg[0]) > 1e-8  # jerk acts
        assert chain.lg[1] == pytest.approx(0.0, abs=1e-12)  # steering not yet

    def test_containment_steering_appears_at_three(self):
        path = gentle_curve_path()
        bar = containment_barrier(path, 0.6, 1.2, True, (1.0, 1.0, 1.0), 2.0, 2.0)
        x = np.array([20.0, 0.2, 0.05, 4.0, 0.2, 0.1, 0.05])
        assert lowest_control_level(bar, x) == 3
        chain = evaluate_chain(bar, x)
        assert abs(chain.lg[1]) > 1e-8


def qp_controller(rows_fn, u_max, p_e=1e3):
    def controller(x):
        rows = rows_fn(x)
        prob = rows_to_qp(rows, 1, [(-u_max, u_max)], [1.0, p_e], relax_order=("clf",))
        out = solve_qp(prob)
        assert out.ok, f"controller QP {out.status}"
        return float(out.z[0])

    return controller


class TestClosedLoopProperties:
    def test_forward_invariance_stop_before_wall(self):
        """b = wall - p stays >= -1e-6 for 10 s despite a speed-seeking CLF."""
        wall = 12.0
        bar = wall_barrier(wall, gains=(1.0, 1.0))
        clf = speed_tracking_clf(v_des=4.0, epsilon=0.8)

        def rows(x):
            r_bar = hocbf_row(bar, x)
            r_clf, _ = clf_row(clf, x)
            return [r_bar, r_clf]

        xs = simulate_double_integrator([0.0, 2.0], steps=100, dt=0.1,
                                        controller=qp_controller(rows, u_max=3.0))
        b_values = wall - xs[:, 0]
        assert b_values.min() >= -1e-6
        # and it actually approached the wall rather than stopping early
        assert xs[:, 0].max() > wall - 2.0

    def test_clf_exponential_decay_hard_row(self):
        """With the relaxation forced to zero, V(t) <= V(0) e^{-eps t}(1+1e-3)."""
        eps = 0.5
        clf = position_clf(1.0, eps)

        def controller(x):
            row, _ = clf_row(clf, x)
            row.relax_key = None  # delta_e forced to zero: hard row
            prob = rows_to_qp([row], 1, [(-50.0, 50.0)], [1.0])
            out = solve_qp(prob)
            assert out.ok
            return float(out.z[0])

        dt = 0.1
        xs = simulate_double_integrator([2.0, 0.0], steps=100, dt=dt, controller=controller)
        v0 = (xs[0, 1] + xs[0, 0]) ** 2
        for k, x in enumerate(xs):
            v = (x[1] + x[0]) ** 2
            assert v <= v0 * math.exp(-eps * k * dt) * (1 + 1e-3) + 1e-12


class TestValidation:
    def test_bad_degree(self):
        with pytest.raises(InvalidArgumentError):
            BarrierSpec("b", 4, (1, 1, 1, 1), double_integrator_field,
                        lambda jets: jets[0], n_controls=1)

    def test_gain_count_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            BarrierSpec("b", 2, (1.0,), double_integrator_field,
                        lambda jets: jets[0], n_controls=1)


class TestChainErrors:
    def test_non_differentiable_state_names_the_rule(self):
        bar = BarrierSpec("sqrt_gap", 1, (1.0,), single_integrator_field,
                          lambda jets: jets[0].sqrt(), n_controls=1, rule_id="r42")
        with pytest.raises(InvalidArgumentError, match="r42"):
            hocbf_row(bar, [-1.0])
