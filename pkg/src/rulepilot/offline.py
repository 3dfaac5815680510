"""Full-information controller: iterative rule relaxation over the sorted
power set, one CLF/CBF QP per time step, plus tracking-parameter tuning.

Each relaxation level k fixes the set of rule classes whose barrier rows get
slack columns, then solves the whole horizon from t = 0. The first level whose
every step is feasible wins; the reported relaxed set keeps only rules whose
slack actually left zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import OfflineConfig
from .dynamics import Control, EgoState, integrate_step
from .errors import NoSolutionError, SolverFailureError
from .qp_assembly import build_qp
from .rules import (
    RuleHierarchy,
    TrajectoryRecord,
    ViolationReport,
    score_trajectory,
)
from .scenario import Scenario
from .solvers import solve_qp
from .vehicle_constraints import (
    WorldContext,
    assemble_rule_rows,
    build_coverage,
    clf_tracking_row,
    state_limit_rows,
)


def make_world(scenario: Scenario, config, rules: dict) -> WorldContext:
    coverage = build_coverage(scenario, rules, scenario.bounds.v_max,
                              config.coverage_beta, config.coverage_z_max)
    return WorldContext(
        scenario=scenario,
        path=scenario.reference_path(config.curvature_smoothing),
        coverage=coverage,
        gains=config.gains,
        lane_margin=config.lane_margin,
        activation_radius=config.activation_radius,
        freeze_clearance_speed=not config.clearance_speed_in_chain,
        clearance_margin=config.clearance_margin,
    )


def merged_rules(hierarchy: RuleHierarchy, scenario: Scenario) -> dict:
    """Hierarchy rule definitions with per-scenario parameter overrides."""
    out = {}
    for rid, rule in hierarchy.rules.items():
        overrides = scenario.rule_parameters.get(rid)
        out[rid] = rule.with_params(overrides) if overrides else rule
    return out


@dataclass
class StepSolution:
    feasible: bool
    control: Control | None = None
    deltas: dict[str, float] = field(default_factory=dict)
    clf_value: float = math.nan
    clf_slack: float = math.nan


def qp_step(
    world: WorldContext,
    state: EgoState,
    instance_samples,
    rules: dict,
    relaxed: set[str],
    hierarchy: RuleHierarchy,
    config,
    detected: set[str] | None = None,
    u_ref: np.ndarray | None = None,
    with_clf: bool = True,
) -> StepSolution:
    """One control interval's QP: CLF row (offline), rule rows with the
    relaxed subset slacked, hard state-limit rows, and control boxes."""
    ctx = world.context_at(state)
    rows = []
    v_value = math.nan
    if with_clf:
        clf_row, v_value = clf_tracking_row(ctx, config.clf)
        rows.append(clf_row)
    rows.extend(assemble_rule_rows(world, ctx, rules, relaxed, instance_samples, detected))
    rows.extend(state_limit_rows(ctx, world.scenario.bounds, world.gains))

    penalties = {"clf": config.clf.p_e}
    for rid in relaxed:
        penalties[rid] = config.penalty_for(hierarchy.priority_of(rid))
    problem, keys = build_qp(rows, world.scenario.bounds, config.control_weight,
                             penalties, u_ref)
    outcome = solve_qp(problem)
    if outcome.status == "numerical-failure":
        raise SolverFailureError(
            f"QP solver failed at s={state.s:.2f} (never conflated with infeasibility)")
    if outcome.status == "infeasible":
        return StepSolution(feasible=False, clf_value=v_value)
    z = outcome.z
    deltas = {key: float(z[2 + i]) for i, key in enumerate(keys) if key != "clf"}
    clf_slack = float(z[2 + keys.index("clf")]) if "clf" in keys else math.nan
    return StepSolution(
        feasible=True,
        control=Control(float(z[0]), float(z[1])),
        deltas=deltas,
        clf_value=v_value,
        clf_slack=clf_slack,
    )


@dataclass
class PassResult:
    feasible: bool
    record: TrajectoryRecord | None = None
    delta_series: dict[str, np.ndarray] = field(default_factory=dict)
    clf_values: np.ndarray | None = None
    failed_at_step: int | None = None
    path_exhausted: bool = False


def run_pass(
    world: WorldContext,
    hierarchy: RuleHierarchy,
    rules: dict,
    relaxed: set[str],
    config,
) -> PassResult:
    """Simulate t in [0, T] with a fixed relaxed set; abort on the first
    infeasible step (the relaxation level is a conjunction over all steps)."""
    scenario = world.scenario
    dt = scenario.dt
    n_steps = scenario.n_steps
    state = scenario.ego.initial_state

    times = [0.0]
    states = [state]
    controls: list[Control] = []
    deltas: dict[str, list[float]] = {rid: [] for rid in relaxed}
    clf_values = []
    path_exhausted = False

    for k in range(n_steps):
        t = k * dt
        samples = scenario.instance_states(t)
        sol = qp_step(world, state, samples, rules, relaxed, hierarchy, config)
        clf_values.append(sol.clf_value)
        if not sol.feasible:
            return PassResult(feasible=False, failed_at_step=k)
        for rid in relaxed:
            deltas[rid].append(sol.deltas.get(rid, 0.0))
        controls.append(sol.control)
        state = integrate_step(state, sol.control, world.path, dt,
                               world.l_r, world.l_f)
        times.append((k + 1) * dt)
        states.append(state)
        if state.s >= world.path.length - 1.0:
            path_exhausted = True
            break

    record = build_record(world, scenario, times, states, controls)
    return PassResult(
        feasible=True,
        record=record,
        delta_series={rid: np.array(v) for rid, v in deltas.items()},
        clf_values=np.array(clf_values),
        path_exhausted=path_exhausted,
    )


def build_record(world, scenario, times, states, controls) -> TrajectoryRecord:
    times_arr = np.asarray(times)
    poses = [world.path.to_global(st.s, st.d, st.mu) for st in states]
    kappas = np.array([world.path.kappa(st.s) for st in states])
    instance_poses = {
        inst.instance_id: [inst.state_at(float(t)).pose for t in times_arr]
        for inst in scenario.instances
    }
    return TrajectoryRecord(times=times_arr, states=list(states), controls=list(controls),
                            poses=poses, kappas=kappas, instance_poses=instance_poses,
                            dt=scenario.dt)


@dataclass
class OfflineResult:
    record: TrajectoryRecord
    report: ViolationReport
    relaxed_rules: set[str]
    relax_level: int  # 1-based index into the sorted power set
    relaxed_classes: frozenset[int]
    delta_series: dict[str, np.ndarray]
    feasibility_log: list[dict]
    clf_values: np.ndarray
    path_exhausted: bool


def run_offline(scenario: Scenario, hierarchy: RuleHierarchy,
                config: OfflineConfig | None = None) -> OfflineResult:
    """Iterate relaxation levels in sorted-power-set order until one is
    feasible for the whole horizon.

    ``config.require_relaxed`` names rules whose classes must be in every
    attempted level (skipping earlier levels); the winning level's rules are
    pruned to those whose slack exceeded the zero threshold.
    """
    config = config or OfflineConfig()
    from .rules import sorted_power_set  # local to keep module import cheap

    rules = merged_rules(hierarchy, scenario)
    world = make_world(scenario, config, rules)
    required = frozenset(hierarchy.priority_of(rid) for rid in config.require_relaxed)

    log: list[dict] = []
    for k, subset in enumerate(sorted_power_set(hierarchy), start=1):
        if not required <= subset:
            continue
        relaxed = {rid for p in subset for rid in hierarchy.class_rules(p)}
        result = run_pass(world, hierarchy, rules, relaxed, config)
        log.append({
            "level": k,
            "classes": sorted(subset),
            "relaxed_rules": sorted(relaxed),
            "feasible": result.feasible,
            "failed_at_step": result.failed_at_step,
        })
        if not result.feasible:
            continue
        kept = {
            rid for rid in relaxed
            if result.delta_series[rid].size
            and float(np.abs(result.delta_series[rid]).max()) > config.delta_zero_threshold
        }
        report = score_trajectory(result.record, scenario, hierarchy)
        return OfflineResult(
            record=result.record,
            report=report,
            relaxed_rules=kept,
            relax_level=k,
            relaxed_classes=subset,
            delta_series=result.delta_series,
            feasibility_log=log,
            clf_values=result.clf_values,
            path_exhausted=result.path_exhausted,
        )
    raise NoSolutionError(
        f"all {len(log)} attempted relaxation levels were infeasible; log={log}")


def tracking_rms(world, config) -> float | None:
    """RMS lateral error of a rules-free rollout; None when infeasible."""
    empty = RuleHierarchy((), {})
    result = run_pass(world, empty, {}, set(), config)
    if not result.feasible:
        return None
    d = np.array([st.d for st in result.record.states])
    return float(np.sqrt(np.mean(d * d)))


def tune_parameters(scenario: Scenario, config: OfflineConfig) -> OfflineConfig:
    """Coordinate-descent tuning of the tracking parameters.

    Perturbs (epsilon, p_e, lam1, lam2) multiplicatively, keeps steps that
    reduce rules-free RMS lateral error, and rejects any step that makes the
    rollout infeasible. Budgeted; returns the best configuration found.
    """
    world = make_world(scenario, config, {})
    best_cfg = config
    best_rms = tracking_rms(world, config)
    if best_rms is None:
        raise NoSolutionError("initial configuration is infeasible on the tuning rollout")

    coords = ("epsilon", "p_e", "lam1", "lam2")
    factors = (1.6, 0.625)
    budget = config.tuning_budget
    improved = True
    while improved and budget > 0:
        improved = False
        for coord in coords:
            for factor in factors:
                if budget <= 0:
                    break
                budget -= 1
                current = getattr(best_cfg.clf, coord)
                candidate = best_cfg.tuned(**{coord: current * factor})
                rms = tracking_rms(world, candidate)
                if rms is not None and rms < best_rms - 1e-6:
                    best_cfg, best_rms = candidate, rms
                    improved = True
    return best_cfg
