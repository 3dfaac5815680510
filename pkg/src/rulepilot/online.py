"""Local-sensing receding-horizon controller: per-step tracking NLP, rule
activation from detections, a forward-feasibility QP roll with a growing
relaxation set, a statement-level audit that shrinks it back, and one applied
control per interval.

The relaxation set S_r is kept as full-hierarchy class priorities and is
always downward closed: growth adds the lowest active class not yet included;
the audit replaces it with all classes strictly below the highest violated
one (or empties it when every hard rule held over the roll).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import OnlineConfig
from .dynamics import Control, EgoState, integrate_step
from .errors import SolverFailureError
from .offline import build_record, make_world, merged_rules
from .rules import (
    RuleHierarchy,
    TrajectoryRecord,
    ViolationReport,
    build_active_hierarchy,
    score_trajectory,
)
from .scenario import InstanceSample, Scenario
from .solvers import NlpProblem, solve_tracking_nlp
from .vehicle_constraints import WorldContext

AUDIT_TOL = 1e-6


def sense(scenario: Scenario, ego_pose, t: float, radius: float) -> dict[str, InstanceSample]:
    """Instances whose reference point lies within the closed sensing disk,
    with their current state and velocity (the sensor reports both)."""
    detected = {}
    for inst in scenario.instances:
        sample = inst.state_at(t)
        dist = math.hypot(sample.pose.x - ego_pose.x, sample.pose.y - ego_pose.y)
        if dist <= radius:
            detected[inst.instance_id] = sample
    return detected


def predict_instances(
    scenario: Scenario,
    detected: dict[str, InstanceSample],
    t: float,
    horizon: int,
    dt: float,
) -> list[dict[str, InstanceSample]]:
    """Constant-control rollout of each detected instance over the horizon.

    Static instances stay put, constant-velocity ones advance linearly from
    their sensed state, scripted ones follow their script samples.
    """
    by_id = {inst.instance_id: inst for inst in scenario.instances}
    steps: list[dict[str, InstanceSample]] = []
    for k in range(horizon):
        tk = t + k * dt
        step: dict[str, InstanceSample] = {}
        for iid, sample in detected.items():
            inst = by_id[iid]
            if inst.motion == "scripted":
                step[iid] = inst.state_at(tk)
            else:
                vx, vy = sample.velocity
                from .geometry import Pose
                step[iid] = InstanceSample(
                    Pose(sample.pose.x + vx * (tk - t), sample.pose.y + vy * (tk - t),
                         sample.pose.heading),
                    sample.speed, sample.velocity)
        steps.append(step)
    return steps


@dataclass
class OnlineStepResult:
    control: Control
    relax_set: frozenset[int]
    detected: frozenset[str]
    emergency: bool = False
    resolve_infeasible: bool = False
    grow_iterations: int = 0
    mpc_degraded: bool = False


@dataclass
class OnlineResult:
    record: TrajectoryRecord
    report: ViolationReport
    relax_history: list[frozenset[int]]
    detections: list[frozenset[str]]
    events: list[dict]
    emergency_steps: int


def _emergency_control(state: EgoState, bounds) -> Control:
    if state.v > 0.1:
        return Control(bounds.jerk_min, 0.0)
    return Control(min(max(-state.a, bounds.jerk_min), bounds.jerk_max), 0.0)


def _relaxed_rules(hierarchy: RuleHierarchy, active: RuleHierarchy,
                   s_r: frozenset[int]) -> set[str]:
    return {rid for rid in active.rules if hierarchy.priority_of(rid) in s_r}


def online_step(
    world: WorldContext,
    state: EgoState,
    t: float,
    hierarchy: RuleHierarchy,
    rules: dict,
    s_r: frozenset[int],
    floor: frozenset[int],
    config: OnlineConfig,
) -> tuple[OnlineStepResult, frozenset[int]]:
    """One control interval of the receding-horizon algorithm.

    Returns the applied control and the relaxation set carried to the next
    step. The roll simulates the true dynamics under each interval's QP
    solution against predicted instance states.
    """
    scenario = world.scenario
    dt = scenario.dt
    h_steps, ht_steps = config.steps(dt)

    nlp = NlpProblem(horizon=h_steps, x0=state, path=world.path, dt=dt,
                     bounds=scenario.bounds, v_des=config.clf.v_des,
                     weights=config.mpc_weights, l_r=world.l_r, l_f=world.l_f)
    mpc = solve_tracking_nlp(nlp)

    ego_pose = world.path.to_global(state.s, state.d, state.mu)
    detected = sense(scenario, ego_pose, t, config.sensing_radius)
    detected_kinds = {scenario_kind(scenario, iid) for iid in detected}
    active = build_active_hierarchy(hierarchy, detected_kinds)
    active_rules = {rid: rules[rid] for rid in active.rules}
    present = sorted({hierarchy.priority_of(rid) for rid in active.rules})
    predictions = predict_instances(scenario, detected, t, ht_steps, dt)

    def roll(relax_set: frozenset[int]):
        relaxed = _relaxed_rules(hierarchy, active, relax_set)
        sim = state
        solutions = []
        audit_min: dict[str, float] = {}
        for k in range(ht_steps):
            sol, rows = qp_step_with_rows(world, sim, predictions[k], active_rules,
                                          relaxed, hierarchy, config,
                                          detected=set(detected), u_ref=mpc.controls[k])
            if not sol.feasible:
                return None, k
            for row in rows:
                if row.rule_id is not None and row.relax_key is None:
                    cur = audit_min.get(row.rule_id, math.inf)
                    audit_min[row.rule_id] = min(cur, row.psi0)
            solutions.append(sol)
            sim = integrate_step(sim, sol.control, world.path, dt, world.l_r, world.l_f)
        return (solutions, audit_min), None

    grow = 0
    emergency = False
    current = frozenset(s_r)
    while True:
        result, failed_k = roll(current)
        if result is not None:
            break
        grow += 1
        addable = [p for p in present if p not in current]
        if not addable:
            emergency = True
            break
        current = frozenset(current | {min(addable)})

    if emergency:
        control = _emergency_control(state, scenario.bounds)
        step = OnlineStepResult(control=control, relax_set=current,
                                detected=frozenset(detected), emergency=True,
                                grow_iterations=grow, mpc_degraded=mpc.degraded)
        return step, current

    solutions, audit_min = result
    violated = [hierarchy.priority_of(rid) for rid, worst in audit_min.items()
                if worst < -AUDIT_TOL]
    if violated:
        h_star = max(violated)
        next_s_r = frozenset(p for p in range(1, h_star)) | floor
    else:
        next_s_r = frozenset(floor)

    relaxed_final = _relaxed_rules(hierarchy, active, next_s_r)
    final_sol, _ = qp_step_with_rows(world, state, predictions[0], active_rules,
                                     relaxed_final, hierarchy, config,
                                     detected=set(detected), u_ref=mpc.controls[0])
    resolve_infeasible = not final_sol.feasible
    control = solutions[0].control if resolve_infeasible else final_sol.control
    step = OnlineStepResult(control=control, relax_set=next_s_r,
                            detected=frozenset(detected),
                            resolve_infeasible=resolve_infeasible,
                            grow_iterations=grow, mpc_degraded=mpc.degraded)
    return step, next_s_r


def qp_step_with_rows(world, state, instance_samples, rules, relaxed, hierarchy,
                      config, detected, u_ref):
    """Online QP: match the tracking reference, no Lyapunov row."""
    from .qp_assembly import build_qp
    from .solvers import solve_qp
    from .vehicle_constraints import assemble_rule_rows, state_limit_rows
    from .offline import StepSolution

    ctx = world.context_at(state)
    rows = assemble_rule_rows(world, ctx, rules, relaxed, instance_samples, detected)
    rows.extend(state_limit_rows(ctx, world.scenario.bounds, world.gains))
    penalties = {rid: config.penalty_for(hierarchy.priority_of(rid)) for rid in relaxed}
    penalties["clf"] = config.clf.p_e
    problem, keys = build_qp(rows, world.scenario.bounds, config.control_weight,
                             penalties, u_ref=np.asarray(u_ref))
    outcome = solve_qp(problem)
    if outcome.status == "numerical-failure":
        raise SolverFailureError(f"online QP failed at s={state.s:.2f}")
    if outcome.status == "infeasible":
        return StepSolution(feasible=False), rows
    z = outcome.z
    deltas = {key: float(z[2 + i]) for i, key in enumerate(keys)}
    return StepSolution(feasible=True, control=Control(float(z[0]), float(z[1])),
                        deltas=deltas), rows


def scenario_kind(scenario: Scenario, instance_id: str) -> str:
    for inst in scenario.instances:
        if inst.instance_id == instance_id:
            return inst.kind
    raise KeyError(instance_id)


def run_online(scenario: Scenario, hierarchy: RuleHierarchy,
               config: OnlineConfig | None = None) -> OnlineResult:
    """Repeat online steps until the horizon ends or the path is exhausted."""
    config = config or OnlineConfig()
    rules = merged_rules(hierarchy, scenario)
    world = make_world(scenario, config, rules)

    floor_base = {hierarchy.priority_of(rid) for rid in config.require_relaxed}
    floor = frozenset(p for p in range(1, max(floor_base) + 1)) if floor_base else frozenset()

    state = scenario.ego.initial_state
    s_r: frozenset[int] = frozenset(floor)
    times = [0.0]
    states = [state]
    controls: list[Control] = []
    relax_history: list[frozenset[int]] = []
    detections: list[frozenset[str]] = []
    events: list[dict] = []
    emergencies = 0

    for k in range(scenario.n_steps):
        t = k * scenario.dt
        step, s_r = online_step(world, state, t, hierarchy, rules, s_r, floor, config)
        relax_history.append(step.relax_set)
        detections.append(step.detected)
        if step.emergency:
            emergencies += 1
            events.append({"step": k, "event": "emergency"})
        if step.resolve_infeasible:
            events.append({"step": k, "event": "resolve_infeasible"})
        controls.append(step.control)
        state = integrate_step(state, step.control, world.path, scenario.dt,
                               world.l_r, world.l_f)
        times.append((k + 1) * scenario.dt)
        states.append(state)
        if state.s >= world.path.length - 1.0:
            events.append({"step": k, "event": "path_exhausted"})
            break

    record = build_record(world, scenario, times, states, controls)
    report = score_trajectory(record, scenario, hierarchy)
    return OnlineResult(record=record, report=report, relax_history=relax_history,
                        detections=detections, events=events,
                        emergency_steps=emergencies)
