"""Violation metrics, the priority structure, the comparator, the sorted power
set, and online rule activation."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rulepilot.dynamics import EgoState
from rulepilot.errors import InvalidArgumentError
from rulepilot.geometry import Footprint, Pose
from rulepilot.rules import (
    A_BETTER,
    B_BETTER,
    EQUIVALENT,
    RuleDef,
    RuleHierarchy,
    RuleReportEntry,
    ViolationReport,
    aggregate_series,
    build_active_hierarchy,
    compare_trajectories,
    default_rule,
    instance_violation,
    instantaneous_violation,
    score_trajectory,
    sorted_power_set,
    total_violation,
)
from rulepilot.scenario import Instance

from support import cruising_states, make_record, make_straight_scenario


def pedestrian(x, y, name="ped0"):
    return Instance(name, "pedestrian", Footprint.centered(0.6, 0.6), Pose(x, y, 0.0))


def report_from_totals(totals):
    return ViolationReport({
        rid: RuleReportEntry(total=v, instance_scores={}, series={}, active=True)
        for rid, v in totals.items()
    })


def hierarchy_example_one():
    """Four rules, three classes; clearance-with-parked on top (highest)."""
    rules = [
        default_rule("r7", "parked_clearance"),
        default_rule("r3", "lane_keeping"),
        default_rule("r5", "speed_min"),
        default_rule("r6", "comfort"),
    ]
    return RuleHierarchy.from_ordered([["r6"], ["r3", "r5"], ["r7"]], rules)


class TestInstantaneous:
    def test_far_pedestrian_scores_zero(self):
        scenario = make_straight_scenario([pedestrian(30.0, 30.0)])
        record = make_record(scenario, cruising_states(5))
        rule = scenario_rule("r1", "pedestrian_clearance")
        assert instantaneous_violation(rule, record, scenario, 0, "ped0") == 0.0

    def test_contact_at_vmax_saturates_to_one(self):
        # d_min = 0 at v = v_max: numerator equals normalizer -> exactly 1.
        # Lane arc length s maps to world x = s - 20; at sample 1, s = 21 -> x = 1.
        scenario = make_straight_scenario([pedestrian(2.0, 0.9 + 0.3)], v0=10.0)
        states = cruising_states(3, v=10.0)
        record = make_record(scenario, states)
        rule = scenario_rule("r1", "pedestrian_clearance")
        val = instantaneous_violation(rule, record, scenario, 1, "ped0")
        assert val == pytest.approx(1.0, abs=1e-9)

    def test_threshold_exactly_met_is_zero(self):
        rule = scenario_rule("r1", "pedestrian_clearance")
        v = 4.0
        threshold = rule.params["d"] + v * rule.params["eta"]
        # lateral gap between footprints equals the threshold exactly
        y = 0.9 + 0.3 + threshold
        scenario = make_straight_scenario([pedestrian(0.4, y)], v0=v)
        record = make_record(scenario, cruising_states(3, v=v))
        assert instantaneous_violation(rule, record, scenario, 1, "ped0") == \
            pytest.approx(0.0, abs=1e-12)

    def test_speed_min_full_stop_scores_one(self):
        scenario = make_straight_scenario()
        record = make_record(scenario, cruising_states(3, v=0.0))
        rule = scenario_rule("r5", "speed_min")
        assert instantaneous_violation(rule, record, scenario, 0) == pytest.approx(1.0)

    def test_statement_iff_zero(self):
        """Instantaneous score is zero exactly when the statement holds."""
        rng = np.random.default_rng(8)
        scenario = make_straight_scenario([pedestrian(40.0, rng.uniform(1.5, 6.0))])
        r1 = scenario_rule("r1", "pedestrian_clearance")
        r4 = scenario_rule("r4", "speed_max")
        r5 = scenario_rule("r5", "speed_min")
        from rulepilot.geometry import rect_distance
        from rulepilot.rules import center_pose
        for _ in range(60):
            v = rng.uniform(0, 10)
            d = rng.uniform(-1.5, 1.5)
            s = rng.uniform(20, 60)
            record = make_record(scenario, [EgoState(s, d, 0.0, v, 0.0, 0.0, 0.0)] * 2)
            ped = scenario.instances[0]
            d_min = rect_distance(center_pose(record.poses[0], scenario.ego.footprint),
                                  scenario.ego.footprint, ped.pose, ped.footprint)
            holds = d_min >= r1.params["d"] + v * r1.params["eta"]
            assert (instantaneous_violation(r1, record, scenario, 0, "ped0") == 0.0) == holds
            assert (instantaneous_violation(r4, record, scenario, 0) == 0.0) == (v <= 7.0)
            assert (instantaneous_violation(r5, record, scenario, 0) == 0.0) == (v >= 3.0)


def scenario_rule(rid, kind, **over):
    return default_rule(rid, kind, over or None)


class TestAggregation:
    def test_all_zero_series(self):
        rule = scenario_rule("r1", "pedestrian_clearance")
        assert aggregate_series(rule, np.zeros(50)) == 0.0

    def test_single_spike_max_semantics(self):
        rule = scenario_rule("r1", "pedestrian_clearance")
        series = np.zeros(50)
        series[13] = 1.0
        assert aggregate_series(rule, series) == 1.0

    def test_constant_series_rms(self):
        rule = scenario_rule("r5", "speed_min")
        c = 0.36
        assert aggregate_series(rule, np.full(80, c)) == pytest.approx(math.sqrt(c))

    def test_total_single_instance_root_mean(self):
        # 1 pedestrian with instance score 0.25 -> total 0.5
        scenario = make_straight_scenario([pedestrian(500.0, 0.0)])
        rule = scenario_rule("r1", "pedestrian_clearance")
        entry = RuleReportEntry(0.0, {"ped0": 0.25}, {}, True)
        total = math.sqrt(sum(entry.instance_scores.values()) / 1)
        assert total == pytest.approx(0.5)

    def test_total_four_instances(self):
        scores = {"a": 1.0, "b": 0.0, "c": 0.0, "d": 0.0}
        assert math.sqrt(sum(scores.values()) / 4) == pytest.approx(0.5)

    def test_total_violation_inactive_without_instances(self):
        scenario = make_straight_scenario([])
        record = make_record(scenario, cruising_states(4))
        entry = total_violation(scenario_rule("r1", "pedestrian_clearance"),
                                record, scenario)
        assert entry.total == 0.0 and not entry.active

    def test_metrics_clamped_to_unit_interval(self):
        rng = np.random.default_rng(5)
        scenario = make_straight_scenario([pedestrian(25.0, 0.0)], v0=10.0)
        rules = [scenario_rule("r1", "pedestrian_clearance"),
                 scenario_rule("r3", "lane_keeping"),
                 scenario_rule("r5", "speed_min"),
                 scenario_rule("r6", "comfort")]
        for _ in range(15):
            states = [EgoState(rng.uniform(15, 35), rng.uniform(-8, 8), 0.0,
                               rng.uniform(0, 10), rng.uniform(-6, 6), 0.0, 0.0)
                      for _ in range(6)]
            record = make_record(scenario, states)
            for rule in rules:
                inst = "ped0" if rule.instance_dependent else None
                for k in range(6):
                    val = instantaneous_violation(rule, record, scenario, k, inst)
                    assert 0.0 <= val <= 1.0
                assert 0.0 <= instance_violation(rule, record, scenario, inst) <= 1.0


class TestComparator:
    def test_example_ordering_b_c_a(self):
        """The worked three-trajectory example: b beats c beats a."""
        h = hierarchy_example_one()
        rep_a = report_from_totals({"r7": 0.2, "r3": 0.3, "r5": 0.0, "r6": 0.1})
        rep_b = report_from_totals({"r7": 0.0, "r3": 0.1, "r5": 0.05, "r6": 0.5})
        rep_c = report_from_totals({"r7": 0.0, "r3": 0.4, "r5": 0.1, "r6": 0.2})
        assert max(0.1, 0.05) == 0.1 and max(0.4, 0.1) == 0.4
        assert compare_trajectories(h, rep_b, rep_a) == A_BETTER
        assert compare_trajectories(h, rep_c, rep_a) == A_BETTER
        assert compare_trajectories(h, rep_b, rep_c) == A_BETTER
        assert compare_trajectories(h, rep_a, rep_b) == B_BETTER

    def test_identical_reports_equivalent(self):
        h = hierarchy_example_one()
        rep = report_from_totals({"r7": 0.0, "r3": 0.2, "r5": 0.0, "r6": 0.1})
        assert compare_trajectories(h, rep, rep) == EQUIVALENT

    def test_descend_on_tie(self):
        h = hierarchy_example_one()
        rep_a = report_from_totals({"r7": 0.0, "r3": 0.3, "r5": 0.0, "r6": 0.2})
        rep_b = report_from_totals({"r7": 0.0, "r3": 0.3, "r5": 0.0, "r6": 0.4})
        assert compare_trajectories(h, rep_a, rep_b) == A_BETTER

    def test_mismatched_rule_sets_rejected(self):
        h = hierarchy_example_one()
        with pytest.raises(InvalidArgumentError):
            compare_trajectories(h, report_from_totals({"r7": 0.0}),
                                 report_from_totals({"r7": 0.0}))

    @given(st.lists(st.tuples(*[st.floats(0, 1) for _ in range(4)]),
                    min_size=3, max_size=3))
    @settings(max_examples=300, deadline=None)
    def test_trichotomy_and_transitivity(self, triple):
        h = hierarchy_example_one()
        ids = ["r7", "r3", "r5", "r6"]
        reports = [report_from_totals(dict(zip(ids, t))) for t in triple]
        outcomes = {}
        for i in range(3):
            for j in range(3):
                if i != j:
                    outcomes[(i, j)] = compare_trajectories(h, reports[i], reports[j])
        # antisymmetry / trichotomy
        for i in range(3):
            for j in range(i + 1, 3):
                a, b = outcomes[(i, j)], outcomes[(j, i)]
                assert (a, b) in ((A_BETTER, B_BETTER), (B_BETTER, A_BETTER),
                                  (EQUIVALENT, EQUIVALENT))
        # transitivity of "not worse"
        def not_worse(i, j):
            return outcomes[(i, j)] in (A_BETTER, EQUIVALENT)
        for i in range(3):
            for j in range(3):
                for k in range(3):
                    if len({i, j, k}) == 3 and not_worse(i, j) and not_worse(j, k):
                        assert not_worse(i, k)

    def test_determinism_under_no_op_rescoring(self):
        h = hierarchy_example_one()
        rep_a = report_from_totals({"r7": 0.0, "r3": 0.25, "r5": 0.1, "r6": 0.0})
        rep_b = report_from_totals({"r7": 0.0, "r3": 0.30, "r5": 0.1, "r6": 0.0})
        first = compare_trajectories(h, rep_a, rep_b)
        for _ in range(5):
            assert compare_trajectories(h, rep_a, rep_b) == first


class TestSortedPowerSet:
    def test_three_class_reference_order(self):
        """The documented eight-element ordering for three classes."""
        h = hierarchy_example_one()
        out = sorted_power_set(h)
        assert out == [frozenset(), frozenset({1}), frozenset({2}), frozenset({1, 2}),
                       frozenset({3}), frozenset({1, 3}), frozenset({2, 3}),
                       frozenset({1, 2, 3})]

    def test_single_class(self):
        h = RuleHierarchy.from_ordered([["r5"]], [default_rule("r5", "speed_min")])
        assert sorted_power_set(h) == [frozenset(), frozenset({1})]

    def test_two_classes(self):
        h = RuleHierarchy.from_ordered(
            [["r5"], ["r3"]],
            [default_rule("r5", "speed_min"), default_rule("r3", "lane_keeping")])
        assert sorted_power_set(h) == [frozenset(), frozenset({1}), frozenset({2}),
                                       frozenset({1, 2})]

    def test_cardinality_and_prefix_property(self):
        h = RuleHierarchy.from_ordered(
            [["r5"], ["r3"], ["r4"], ["r2"]],
            [default_rule("r5", "speed_min"), default_rule("r3", "lane_keeping"),
             default_rule("r4", "speed_max"), default_rule("r2", "drivable_area")])
        out = sorted_power_set(h)
        assert len(out) == 16
        highs = [max(s, default=0) for s in out]
        assert highs == sorted(highs)

    def test_guard_against_blowup(self):
        rules = [default_rule(f"u{i}", "speed_min") for i in range(21)]
        h = RuleHierarchy.from_ordered([[r.rule_id] for r in rules], rules)
        with pytest.raises(InvalidArgumentError):
            sorted_power_set(h)


class TestActiveHierarchy:
    def full(self):
        rules = [
            default_rule("r1", "pedestrian_clearance"),
            default_rule("r3", "lane_keeping"),
            default_rule("r5", "speed_min"),
            default_rule("r6", "comfort"),
            default_rule("r7", "parked_clearance"),
        ]
        return RuleHierarchy.from_ordered(
            [["r5"], ["r3", "r6"], ["r7"], ["r1"]], rules)

    def test_no_detections_keeps_instance_independent_only(self):
        h = build_active_hierarchy(self.full(), set())
        assert set(h.rules) == {"r3", "r5", "r6"}
        assert h.n_classes == 2

    def test_pedestrian_only_detection_drops_parked_class(self):
        h = build_active_hierarchy(self.full(), {"pedestrian"})
        assert set(h.rules) == {"r1", "r3", "r5", "r6"}
        # the r7 class collapsed; r1's class priority renumbered from 4 to 3
        assert h.priority_of("r1") == 3

    def test_all_detected_identity(self):
        full = self.full()
        h = build_active_hierarchy(full, {"pedestrian", "parked", "active"})
        assert h.classes == full.classes

    def test_idempotent(self):
        once = build_active_hierarchy(self.full(), {"pedestrian"})
        twice = build_active_hierarchy(once, {"pedestrian"})
        assert once.classes == twice.classes


class TestScoreTrajectory:
    def test_clean_cruise_scores_zero(self):
        scenario = make_straight_scenario([pedestrian(40.0, 5.0)])
        record = make_record(scenario, cruising_states(30))
        rules = [scenario_rule("r1", "pedestrian_clearance"),
                 scenario_rule("r3", "lane_keeping"),
                 scenario_rule("r4", "speed_max"),
                 scenario_rule("r5", "speed_min")]
        h = RuleHierarchy.from_ordered([["r5"], ["r3"], ["r4"], ["r1"]], rules)
        report = score_trajectory(record, scenario, h)
        assert report.violated() == set()

    def test_slow_cruise_violates_only_speed_min(self):
        scenario = make_straight_scenario()
        record = make_record(scenario, cruising_states(30, v=1.5))
        rules = [scenario_rule("r4", "speed_max"), scenario_rule("r5", "speed_min")]
        h = RuleHierarchy.from_ordered([["r5"], ["r4"]], rules)
        report = score_trajectory(record, scenario, h)
        assert report.violated() == {"r5"}
        assert report.total("r5") == pytest.approx(((3.0 - 1.5) / 3.0), abs=1e-9)


class TestStatementEquivalenceMoreRules:
    def test_lane_comfort_parked_statement_iff_zero(self):
        """Zero instantaneous score exactly when the statement holds, for the
        containment, comfort, and parked-clearance templates."""
        rng = np.random.default_rng(17)
        parked = Instance("pv", "parked", Footprint.centered(4.0, 1.8),
                          Pose(15.0, 2.0, 0.0))
        scenario = make_straight_scenario([parked])
        r3 = scenario_rule("r3", "lane_keeping")
        r6 = scenario_rule("r6", "comfort")
        r7 = scenario_rule("r7", "parked_clearance")
        from rulepilot.geometry import lane_infringement, rect_distance
        from rulepilot.rules import center_pose
        lane = scenario.ego_lane
        for _ in range(40):
            st = EgoState(rng.uniform(20, 45), rng.uniform(-2.5, 2.5), 0.0,
                          rng.uniform(0, 9), rng.uniform(-4, 4), 0.0, 0.0)
            record = make_record(scenario, [st] * 2)
            pose_c = center_pose(record.poses[0], scenario.ego.footprint)

            d_l, d_r = lane_infringement(pose_c, scenario.ego.footprint,
                                         lane.left_boundary, lane.right_boundary)
            holds_r3 = (d_l + d_r) == 0.0
            assert (instantaneous_violation(r3, record, scenario, 0) == 0.0) == holds_r3

            a_lat = record.kappas[0] * st.v ** 2
            holds_r6 = abs(st.a) <= 2.5 and abs(a_lat) <= 1.75
            assert (instantaneous_violation(r6, record, scenario, 0) == 0.0) == holds_r6

            d_min = rect_distance(pose_c, scenario.ego.footprint,
                                  parked.pose, parked.footprint)
            holds_r7 = d_min >= r7.params["d"] + st.v * r7.params["eta"]
            assert (instantaneous_violation(r7, record, scenario, 0, "pv") == 0.0) \
                == holds_r7
