"""Shared test fixtures: double-integrator systems, QP-driven simulations,
and random vehicle states for the chain self-checks."""

import numpy as np

from rulepilot.cbf_clf import BarrierSpec, ClfLyapunov, clf_row, hocbf_row
from rulepilot.dynamics import EgoState, build_reference
from rulepilot.jets import Jet
from rulepilot.solvers import QpProblem, QpOutcome, solve_qp


def double_integrator_field(jets, u):
    """x' = v, v' = u."""
    return [jets[1], Jet(u[0])]


def single_integrator_field(jets, u):
    return [Jet(u[0])]


def wall_barrier(wall: float, gains=(1.0, 1.0)) -> BarrierSpec:
    """b = wall - position for the double integrator (relative degree 2)."""
    return BarrierSpec(
        name="wall",
        rel_degree=2,
        gains=gains,
        field=double_integrator_field,
        expr=lambda jets: wall - jets[0],
        n_controls=1,
    )


def speed_tracking_clf(v_des: float, epsilon: float) -> ClfLyapunov:
    """V = (v - v_des)^2 on the double integrator."""
    return ClfLyapunov(
        field=double_integrator_field,
        expr=lambda jets: (jets[1] - v_des).sq(),
        epsilon=epsilon,
        n_controls=1,
    )


def position_clf(k1: float, epsilon: float) -> ClfLyapunov:
    """Feedback-reduced V = (v + k1 p)^2 driving p -> 0."""
    return ClfLyapunov(
        field=double_integrator_field,
        expr=lambda jets: (jets[1] + k1 * jets[0]).sq(),
        epsilon=epsilon,
        n_controls=1,
    )


def rows_to_qp(rows, n_controls, u_box, p_diag, q_lin=None, relax_order=()):
    """Assemble ConstraintRows + control box into a QpProblem.

    Decision vector: [u..., slack per relax_order]. ``p_diag`` gives the
    quadratic weight per decision variable (already doubled inside).
    """
    slack_cols = {key: n_controls + i for i, key in enumerate(relax_order)}
    n = n_controls + len(relax_order)
    G_rows, h_vals = [], []
    for row in rows:
        g = np.zeros(n)
        if row.sense == "ge":
            g[:n_controls] = -row.coeffs
            if row.relax_key is not None:
                g[slack_cols[row.relax_key]] = 1.0
            h_vals.append(row.constant)
        else:
            g[:n_controls] = row.coeffs
            if row.relax_key is not None:
                g[slack_cols[row.relax_key]] = -1.0
            h_vals.append(-row.constant)
        G_rows.append(g)
    for i, (lo, hi) in enumerate(u_box):
        e = np.zeros(n)
        e[i] = 1.0
        G_rows.append(e.copy())
        h_vals.append(hi)
        G_rows.append(-e)
        h_vals.append(-lo)
    P = 2.0 * np.diag(p_diag)
    q = np.zeros(n) if q_lin is None else np.asarray(q_lin, dtype=float)
    return QpProblem(P, q, np.array(G_rows).reshape(-1, n), np.array(h_vals))


def simulate_double_integrator(x0, steps, dt, controller):
    """Exact ZOH propagation of (p, v) under u = controller(x)."""
    xs = [np.asarray(x0, dtype=float)]
    for _ in range(steps):
        p, v = xs[-1]
        u = controller(xs[-1])
        xs.append(np.array([p + v * dt + 0.5 * u * dt * dt, v + u * dt]))
    return np.array(xs)


def random_vehicle_states(rng, n):
    for _ in range(n):
        yield EgoState(
            s=rng.uniform(5, 80),
            d=rng.uniform(-1.5, 1.5),
            mu=rng.uniform(-0.4, 0.4),
            v=rng.uniform(0.1, 8.0),
            a=rng.uniform(-2.5, 2.5),
            delta=rng.uniform(-0.6, 0.6),
            omega=rng.uniform(-0.4, 0.4),
        )


def gentle_curve_path(length=160.0):
    s = np.linspace(0, length, 200)
    y = 6.0 * np.sin(s / 40.0)
    return build_reference(np.stack([s, y], axis=1))


def make_straight_scenario(instances=(), duration=20.0, dt=0.1, lane_width=3.5,
                           drivable=(3.4, 3.4), v0=4.0):
    """Single straight lane along +x with the given instances."""
    from rulepilot.geometry import Footprint
    from rulepilot.scenario import DrivableArea, EgoSpec, Lane, Scenario
    from rulepilot.dynamics import StateControlBounds

    xs = np.linspace(-20.0, 200.0, 56)
    center = np.stack([xs, np.zeros_like(xs)], axis=1)
    lane = Lane("lane0", center, lane_width)
    area = DrivableArea(center.copy(), drivable[0], drivable[1])
    ego = EgoSpec(
        footprint=Footprint.centered(4.0, 1.8),
        initial_state=EgoState(20.0, 0.0, 0.0, v0, 0.0, 0.0, 0.0),
        lane_id="lane0",
    )
    return Scenario(
        name="straight",
        lanes=[lane],
        drivable=area,
        instances=list(instances),
        ego=ego,
        duration=duration,
        dt=dt,
        bounds=StateControlBounds.default(),
    )


def make_record(scenario, states, controls=None, path=None):
    """TrajectoryRecord from curvilinear ego states against the lane path."""
    from rulepilot.rules import TrajectoryRecord

    if path is None:
        path = scenario.reference_path()
    n = len(states)
    times = np.arange(n) * scenario.dt
    poses = [path.to_global(st.s, st.d, st.mu) for st in states]
    kappas = np.array([path.kappa(st.s) for st in states])
    if controls is None:
        from rulepilot.dynamics import Control
        controls = [Control(0.0, 0.0)] * n
    instance_poses = {
        inst.instance_id: [inst.state_at(float(t)).pose for t in times]
        for inst in scenario.instances
    }
    return TrajectoryRecord(times=times, states=list(states), controls=list(controls),
                            poses=poses, kappas=kappas, instance_poses=instance_poses,
                            dt=scenario.dt)


def cruising_states(n, v=4.0, d=0.0, s0=20.0, dt=0.1):
    return [EgoState(s0 + v * dt * k, d, 0.0, v, 0.0, 0.0, 0.0) for k in range(n)]
