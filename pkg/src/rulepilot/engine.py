"""One engine surface shared by the CLI and the HTTP service, so both
frontends produce identical result payloads for identical inputs."""

from __future__ import annotations

import time

import numpy as np

from .config import OfflineConfig, OnlineConfig
from .evaluation import evaluate_candidate, realize_candidate
from .geometry import Footprint, optimize_coverage
from .offline import run_offline
from .online import run_online
from .rules import RuleHierarchy
from .scenario import Scenario
from .scenario_io import record_to_dict, report_to_dict, result_to_dict, violation_segments


def offline_result(scenario: Scenario, hierarchy: RuleHierarchy,
                   config: OfflineConfig) -> dict:
    t0 = time.perf_counter()
    result = run_offline(scenario, hierarchy, config)
    elapsed = time.perf_counter() - t0
    return result_to_dict(
        "offline", scenario, hierarchy, config, result.record, result.report,
        extra={
            "relaxed_rules": sorted(result.relaxed_rules),
            "relax_level": result.relax_level,
            "relaxed_classes": sorted(result.relaxed_classes),
            "feasibility_log": result.feasibility_log,
            "delta_series": {rid: series.tolist()
                             for rid, series in sorted(result.delta_series.items())},
            "path_exhausted": result.path_exhausted,
            "timing": {"elapsed_s": elapsed},
        })


def online_result(scenario: Scenario, hierarchy: RuleHierarchy,
                  config: OnlineConfig) -> dict:
    t0 = time.perf_counter()
    result = run_online(scenario, hierarchy, config)
    elapsed = time.perf_counter() - t0
    return result_to_dict(
        "online", scenario, hierarchy, config, result.record, result.report,
        extra={
            "relax_history": [sorted(s) for s in result.relax_history],
            "detections": [sorted(d) for d in result.detections],
            "events": result.events,
            "emergency_steps": result.emergency_steps,
            "timing": {"elapsed_s": elapsed},
        })


def evaluate_result(scenario: Scenario, hierarchy: RuleHierarchy,
                    config: OfflineConfig, candidate_points,
                    target_speed: float | None = None) -> dict:
    t0 = time.perf_counter()
    record = realize_candidate(candidate_points, scenario, config, target_speed)
    verdict = evaluate_candidate(record, scenario, hierarchy, config)
    elapsed = time.perf_counter() - t0
    extra = {
        "verdict": verdict.outcome,
        "relaxation_trace": verdict.trace,
        "timing": {"elapsed_s": elapsed},
    }
    if verdict.alternative_record is not None:
        extra["alternative"] = {
            "trajectory": record_to_dict(verdict.alternative_record),
            "violations": report_to_dict(verdict.alternative_report),
            "totals": {rid: verdict.alternative_report.total(rid)
                       for rid in sorted(verdict.alternative_report.entries)},
            "segments": violation_segments(verdict.alternative_report,
                                           verdict.alternative_record.n_samples),
        }
    return result_to_dict("evaluate", scenario, hierarchy, config, record,
                          verdict.candidate_report, extra=extra)


def track_compare_result(scenario: Scenario, offline_config: OfflineConfig,
                         online_config: OnlineConfig) -> dict:
    """Stabilizing-row tracking vs receding-horizon tracking on the same road,
    with no rules active."""
    empty = RuleHierarchy((), {})
    t0 = time.perf_counter()
    clf_run = run_offline(scenario, empty, offline_config)
    t1 = time.perf_counter()
    mpc_run = run_online(scenario, empty, online_config)
    t2 = time.perf_counter()

    def stats(record):
        d = np.array([st.d for st in record.states])
        v = np.array([st.v for st in record.states])
        return {
            "max_abs_lateral_m": float(np.abs(d).max()),
            "rms_lateral_m": float(np.sqrt(np.mean(d * d))),
            "mean_speed_mps": float(v.mean()),
            "final_progress_m": float(record.states[-1].s),
        }

    return {
        "mode": "track-compare",
        "clf": {"trajectory": record_to_dict(clf_run.record), "stats": stats(clf_run.record),
                "elapsed_s": t1 - t0},
        "mpc": {"trajectory": record_to_dict(mpc_run.record), "stats": stats(mpc_run.record),
                "elapsed_s": t2 - t1},
    }


def coverage_result(footprint: Footprint, clearance_bounds: dict,
                    beta: float, z_max: int) -> dict:
    z, radius = optimize_coverage(footprint, clearance_bounds, beta, z_max)
    return {
        "mode": "coverage",
        "disk_count": z,
        "worst_case_radius_m": radius,
        "beta": beta,
        "z_max": z_max,
    }
