"""Pass/fail judging of candidate trajectories: realize a hand-drawn polyline
into a dynamically feasible trajectory, score it, then search for a strictly
better alternative by relaxing only classes at or below the candidate's worst
violated priority."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import OfflineConfig
from .dynamics import EgoState, build_reference, integrate_step, update_reference_index
from .errors import InvalidArgumentError
from .offline import build_record, make_world, merged_rules, qp_step, run_pass
from .rules import (
    A_BETTER,
    RuleHierarchy,
    TrajectoryRecord,
    ViolationReport,
    compare_trajectories,
    score_trajectory,
)
from .scenario import Scenario

PASS = "Pass"
FAIL = "Fail"


@dataclass
class Verdict:
    outcome: str  # Pass | Fail  (the type reserves room for future categories)
    candidate_report: ViolationReport
    alternative_record: TrajectoryRecord | None = None
    alternative_report: ViolationReport | None = None
    trace: list[dict] = field(default_factory=list)


def realize_candidate(
    points,
    scenario: Scenario,
    config: OfflineConfig | None = None,
    target_speed: float | None = None,
    max_deviation: float = 1.0,
) -> TrajectoryRecord:
    """Track a hand-drawn polyline with the stabilizing row and actuator
    limits only (no rule constraints), producing a dynamically feasible
    candidate trajectory.

    ``target_speed`` sets the tracked speed along the polyline (a bare
    polyline cannot express speed, and speed rules need one); defaults to the
    configured desired speed. Raises with the worst deviation when the
    polyline cannot be tracked within bounds.
    """
    config = config or OfflineConfig()
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] < 4:
        raise InvalidArgumentError("candidate polyline needs >= 4 points")
    _check_within_map(points, scenario)

    cand_path = build_reference(points, curvature_smoothing=config.curvature_smoothing)

    # initial state re-expressed relative to the candidate path
    lane_path = scenario.reference_path(config.curvature_smoothing)
    ego0 = scenario.ego.initial_state
    pose0 = lane_path.to_global(ego0.s, ego0.d, ego0.mu)
    start = update_reference_index((pose0.x, pose0.y), points, None)
    s0, d0 = cand_path.project(pose0.x, pose0.y)
    mu0 = _wrap(pose0.heading - cand_path.tangent_angle(s0))
    state = EgoState(s0, d0, mu0, ego0.v, ego0.a, ego0.delta, ego0.omega)
    if abs(d0) > max_deviation:
        raise InvalidArgumentError(
            f"candidate polyline starts {d0:.2f} m from ego (index {start})")

    speed = config.clf.v_des if target_speed is None else float(target_speed)
    from dataclasses import replace
    cand_config = OfflineConfig(clf=replace(config.clf, v_des=speed),
                                gains=config.gains,
                                curvature_smoothing=config.curvature_smoothing)

    # track with no rules: a bare world over the candidate path
    world = make_world(_scenario_on_path(scenario), cand_config, {})
    world.path = cand_path
    empty = RuleHierarchy((), {})

    dt = scenario.dt
    times = [0.0]
    states = [state]
    controls = []
    worst = abs(d0)
    for k in range(scenario.n_steps):
        sol = qp_step(world, state, {}, {}, set(), empty, cand_config)
        if not sol.feasible:
            raise InvalidArgumentError(
                f"candidate untrackable within bounds at t={k * dt:.1f}s "
                f"(max deviation so far {worst:.2f} m)")
        controls.append(sol.control)
        state = integrate_step(state, sol.control, cand_path, dt,
                               world.l_r, world.l_f)
        worst = max(worst, abs(state.d))
        times.append((k + 1) * dt)
        states.append(state)
        if state.s >= cand_path.length - 1.0:
            break
    if worst > max_deviation:
        raise InvalidArgumentError(
            f"candidate untrackable: max lateral deviation {worst:.2f} m "
            f"exceeds {max_deviation} m")

    record_world = _RecordWorld(cand_path, scenario)
    return build_record(record_world, scenario, times, states, controls)


class _RecordWorld:
    def __init__(self, path, scenario):
        self.path = path
        self.scenario = scenario


def _scenario_on_path(scenario: Scenario) -> Scenario:
    """Shallow copy without instances (rule-free tracking rollouts)."""
    import copy
    sc = copy.copy(scenario)
    sc.instances = []
    return sc


def _check_within_map(points: np.ndarray, scenario: Scenario) -> None:
    from .geometry import _signed_offsets
    left = scenario.drivable.left_boundary
    right = scenario.drivable.right_boundary
    margin = 1.0
    if np.any(_signed_offsets(points, left) > margin) or \
            np.any(_signed_offsets(points, right) < -margin):
        raise InvalidArgumentError("candidate polyline leaves the drivable area")


def _wrap(theta: float) -> float:
    from .geometry import wrap_angle
    return wrap_angle(theta)


def _search_order(priorities: list[int]) -> list[frozenset[int]]:
    """The empty set first, then highest-priority classes first (to find a
    feasible alternative quickly), size and priority tuple as tie-breaks."""
    import itertools
    subsets = []
    for size in range(1, len(priorities) + 1):
        subsets.extend(frozenset(c) for c in itertools.combinations(priorities, size))
    subsets.sort(key=lambda sub: (-max(sub), len(sub), tuple(sorted(sub))))
    return [frozenset()] + subsets


def evaluate_candidate(
    candidate: TrajectoryRecord,
    scenario: Scenario,
    hierarchy: RuleHierarchy,
    config: OfflineConfig | None = None,
) -> Verdict:
    """Pass unless a strictly better trajectory can be synthesized.

    The search relaxes only classes with priority at or below the candidate's
    highest violated priority; every attempted level is recorded. Any found
    alternative is compared under the hierarchy; the first one that beats the
    candidate fails it.
    """
    config = config or OfflineConfig()
    report_c = score_trajectory(candidate, scenario, hierarchy)
    violated = report_c.violated()
    if not violated:
        return Verdict(outcome=PASS, candidate_report=report_c)

    h_star = max(hierarchy.priority_of(rid) for rid in violated)
    rules = merged_rules(hierarchy, scenario)
    world = make_world(scenario, config, rules)

    trace: list[dict] = []
    for subset in _search_order(list(range(1, h_star + 1))):
        relaxed = {rid for p in subset for rid in hierarchy.class_rules(p)}
        result = run_pass(world, hierarchy, rules, relaxed, config)
        entry = {"classes": sorted(subset), "feasible": result.feasible}
        if result.feasible:
            report_alt = score_trajectory(result.record, scenario, hierarchy)
            outcome = compare_trajectories(hierarchy, report_alt, report_c)
            entry["comparison"] = outcome
            trace.append(entry)
            if outcome == A_BETTER:
                verdict = Verdict(
                    outcome=FAIL,
                    candidate_report=report_c,
                    alternative_record=result.record,
                    alternative_report=report_alt,
                    trace=trace,
                )
                # soundness: every Fail carries a strictly better alternative
                assert compare_trajectories(
                    hierarchy, verdict.alternative_report, report_c) == A_BETTER
                return verdict
        else:
            trace.append(entry)
    return Verdict(outcome=PASS, candidate_report=report_c, trace=trace)
