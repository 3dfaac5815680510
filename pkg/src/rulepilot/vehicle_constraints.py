"""Constraint families for the curvilinear vehicle: disk clearance, lane and
drivable-area containment, speed/comfort/actuator limits, and the tracking
Lyapunov row.

Clearance rows are evaluated in the global frame, where the unicycle-with-
side-slip kinematics close without any path-curvature terms; containment and
comfort rows stay in the curvilinear frame, where curvature and its spline
derivatives enter the chains. All rows built at one state share the same six
jet propagations (two frames, drift plus one per control), which
``StepContext`` precomputes. Each family also exposes its expression maker so
the finite-difference self-check exercises exactly the shipped formulas.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cbf_clf import BarrierSpec, ConstraintRow, chain_from_jets, row_from_chain
from .dynamics import EgoState, ReferencePath, StateControlBounds
from .errors import InvalidArgumentError
from .geometry import (
    ClearanceSpec,
    Footprint,
    Pose,
    SpeedLaw,
    disk_center_offsets,
    min_radius,
    optimize_coverage,
)
from .jets import Jet, flow_jets
from .scenario import Instance, InstanceSample, Scenario

N_CONTROLS = 2


def curvilinear_field(path: ReferencePath, l_r: float, l_f: float):
    """Flow of (s, d, mu, v, a, delta, omega) along the reference path."""
    ke = l_r / (l_r + l_f)

    def fieldfn(jets, u):
        s, d, mu, v, a, delta, omega = jets
        kappa = s.compose(*path.kappa_jets(s.c[0]))
        beta = (delta.tan() * ke).atan()
        heading = mu + beta
        inv = (1.0 - d * kappa).reciprocal()
        s_dot = v * heading.cos() * inv
        return [
            s_dot,
            v * heading.sin(),
            v * (1.0 / l_r) * beta.sin() - kappa * s_dot,
            a,
            Jet(u[0]),
            omega,
            Jet(u[1]),
        ]

    return fieldfn


def global_field(l_r: float, l_f: float):
    """Flow of (x, y, theta, v, a, delta, omega); curvature-free."""
    ke = l_r / (l_r + l_f)

    def fieldfn(jets, u):
        x, y, theta, v, a, delta, omega = jets
        beta = (delta.tan() * ke).atan()
        heading = theta + beta
        return [
            v * heading.cos(),
            v * heading.sin(),
            v * (1.0 / l_r) * beta.sin(),
            a,
            Jet(u[0]),
            omega,
            Jet(u[1]),
        ]

    return fieldfn


def extended_global_field(l_r: float, l_f: float):
    """Global flow extended with one instance disk (x_i, y_i) moving at its
    constant sensed velocity (vx, vy as trailing states); for self-checks."""
    base = global_field(l_r, l_f)

    def fieldfn(jets, u):
        ego = base(jets[:7], u)
        vx, vy = jets[9], jets[10]
        return ego + [vx, vy, Jet(0.0), Jet(0.0)]

    return fieldfn


_U_VARIANTS = ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0))


@dataclass
class StepContext:
    """Shared jet propagations for all rows assembled at one state."""

    state: EgoState
    pose: Pose  # global CoG pose
    path: ReferencePath
    l_r: float
    l_f: float
    curv_jets: tuple[list[Jet], ...]
    glob_jets: tuple[list[Jet], ...]

    @classmethod
    def at(cls, state: EgoState, path: ReferencePath, l_r: float, l_f: float) -> "StepContext":
        pose = path.to_global(state.s, state.d, state.mu)
        cfield = curvilinear_field(path, l_r, l_f)
        gfield = global_field(l_r, l_f)
        x_curv = state.to_array()
        x_glob = np.array([pose.x, pose.y, pose.heading, state.v, state.a,
                           state.delta, state.omega])
        return cls(
            state=state,
            pose=pose,
            path=path,
            l_r=l_r,
            l_f=l_f,
            curv_jets=tuple(flow_jets(x_curv, u, cfield) for u in _U_VARIANTS),
            glob_jets=tuple(flow_jets(x_glob, u, gfield) for u in _U_VARIANTS),
        )


def _row(jet_triple, expr, m, gains, *, name, rule_id=None, relax_key=None):
    chain = chain_from_jets(expr(jet_triple[0]),
                            [expr(jet_triple[1]), expr(jet_triple[2])], m)
    return row_from_chain(chain, gains[:m], name=name, rule_id=rule_id, relax_key=relax_key)


def _rows_batch(jet_triple, expr, m, gains, *, names, rule_id=None, relax_key=None):
    """Extract one ConstraintRow per element of an array-valued expression.

    The expression runs once per control variant with array constants; the
    chain algebra is identical to the scalar path, broadcast elementwise.
    """
    from .cbf_clf import chain_coefficients, psi_values

    drift = expr(jet_triple[0])
    j1 = expr(jet_triple[1])
    j2 = expr(jet_triple[2])
    lg = np.stack([np.atleast_1d(j1.c[m] - drift.c[m]),
                   np.atleast_1d(j2.c[m] - drift.c[m])], axis=1)
    derivs = [np.atleast_1d(drift.c[i]) for i in range(m + 1)]
    coeffs = chain_coefficients(gains[:m])
    constant = sum(c * derivs[i] for i, c in enumerate(coeffs[:-1])) + derivs[m]
    psi = psi_values(derivs, gains[:m])
    warning = np.zeros(derivs[0].shape, dtype=bool)
    for level in psi:
        warning |= np.atleast_1d(level) < 0.0
    rows = []
    for i, name in enumerate(names):
        rows.append(ConstraintRow(
            coeffs=lg[i].copy(),
            constant=float(constant[i]),
            sense="ge",
            relax_key=relax_key,
            name=name,
            rule_id=rule_id,
            warning=bool(warning[i]),
            psi0=float(derivs[0][i]),
        ))
    return rows


@dataclass(frozen=True)
class FamilyGains:
    clearance: tuple[float, float, float] = (0.8, 0.8, 0.8)
    containment: tuple[float, float, float] = (1.2, 1.2, 1.2)
    limits: tuple[float, float, float] = (4.0, 4.0, 4.0)
    comfort: tuple[float, float, float] = (4.0, 4.0, 4.0)


# ---------------------------------------------------------------------------
# Expression makers (shared by the row builders and the FD self-checks).
# ---------------------------------------------------------------------------


def make_bound_expr(index: int, bound: float, upper: bool):
    def expr(jets):
        return (bound - jets[index]) if upper else (jets[index] - bound)

    return expr


def make_lat_accel_expr(path: ReferencePath, limit: float, sign: float):
    def expr(jets):
        kappa = jets[0].compose(*path.kappa_jets(jets[0].c[0]))
        return limit - sign * kappa * jets[3].sq()

    return expr


def make_containment_expr(limit: float, c_off: float, left_side: bool):
    """b = limit -/+ (d + c sin(mu)) for one footprint disk."""

    def expr(jets):
        lateral = jets[1] + c_off * jets[2].sin()
        return (limit - lateral) if left_side else (lateral + limit)

    return expr


def make_clearance_expr(
    ego_footprint: Footprint,
    clearance: ClearanceSpec,
    z_ego: int,
    disk_index,
    r_inst: float,
    inst_xy: tuple[Jet, Jet] | None = None,
):
    """Squared-distance disk pair constraint on the global jets.

    The ego radius and center offsets carry the clearance speed laws; when
    ``inst_xy`` is None, the instance disk is read from trailing jet slots
    (extended field used by the self-check). ``disk_index`` may be an integer
    or an array of indices (one chain per pair, identical algebra).
    """
    w = ego_footprint.width
    length = ego_footprint.length
    cog_off = ego_footprint.cog_to_center
    inv2z = 1.0 / (2.0 * z_ego)
    j = disk_index

    def expr(jets):
        x, y, theta, v = jets[0], jets[1], jets[2], jets[3]
        if inst_xy is None:
            xi, yi = jets[7], jets[8]
        else:
            xi, yi = inst_xy
        hf = clearance.front.base + clearance.front.slope * v
        hb = clearance.back.base + clearance.back.slope * v
        hl = clearance.left.base + clearance.left.slope * v
        hr = clearance.right.base + clearance.right.slope * v
        half_w = (w + hl + hr) * 0.5
        long_step = (length + hf + hb) * inv2z
        r_ego = (half_w.sq() + long_step.sq()).sqrt()
        c_j = (length + hf + hb) * ((2 * j - 1) * inv2z) - hb + (cog_off - length / 2.0)
        px = x + c_j * theta.cos()
        py = y + c_j * theta.sin()
        return (px - xi).sq() + (py - yi).sq() - (r_ego + r_inst).sq()

    return expr


def clearance_rel_degree(clearance: ClearanceSpec) -> int:
    """2 when any clearance law is speed-dependent (jerk appears via the
    radius/center speed terms), else 3 (steering appears first)."""
    speed_dependent = any(law.slope > 0 for law in
                          (clearance.front, clearance.back, clearance.left, clearance.right))
    return 2 if speed_dependent else 3


# ---------------------------------------------------------------------------
# Row builders.
# ---------------------------------------------------------------------------

_LIMIT_LAYOUT = (
    ("v_max", 3, 2, True), ("v_min", 3, 2, False),
    ("a_max", 4, 1, True), ("a_min", 4, 1, False),
    ("delta_max", 5, 2, True), ("delta_min", 5, 2, False),
    ("omega_max", 6, 1, True), ("omega_min", 6, 1, False),
)


def state_limit_rows(ctx: StepContext, bounds: StateControlBounds,
                     gains: FamilyGains) -> list[ConstraintRow]:
    values = {
        "v_max": bounds.v_max, "v_min": bounds.v_min,
        "a_max": bounds.a_max, "a_min": bounds.a_min,
        "delta_max": bounds.delta_max, "delta_min": bounds.delta_min,
        "omega_max": bounds.omega_max, "omega_min": bounds.omega_min,
    }
    rows = []
    for name, idx, m, upper in _LIMIT_LAYOUT:
        expr = make_bound_expr(idx, values[name], upper)
        rows.append(_row(ctx.curv_jets, expr, m, gains.limits, name=f"limit_{name}"))
    return rows


def speed_rule_rows(ctx: StepContext, rule_id: str, kind: str, v_limit: float,
                    gains: FamilyGains, relax: bool) -> list[ConstraintRow]:
    expr = make_bound_expr(3, v_limit, upper=(kind == "speed_max"))
    return [_row(ctx.curv_jets, expr, 2, gains.limits,
                 name=f"{rule_id}_speed", rule_id=rule_id,
                 relax_key=rule_id if relax else None)]


def comfort_rows(ctx: StepContext, rule_id: str, a_limit: float, a_lat_limit: float,
                 gains: FamilyGains, relax: bool) -> list[ConstraintRow]:
    relax_key = rule_id if relax else None
    rows = []
    for sign, tag in ((1.0, "upper"), (-1.0, "lower")):
        def expr_a(jets, sign=sign):
            return a_limit - sign * jets[4]

        rows.append(_row(ctx.curv_jets, expr_a, 1, gains.comfort,
                         name=f"{rule_id}_accel_{tag}", rule_id=rule_id,
                         relax_key=relax_key))
    for sign, tag in ((1.0, "left"), (-1.0, "right")):
        expr = make_lat_accel_expr(ctx.path, a_lat_limit, sign)
        rows.append(_row(ctx.curv_jets, expr, 2, gains.comfort,
                         name=f"{rule_id}_lat_{tag}", rule_id=rule_id,
                         relax_key=relax_key))
    return rows


def containment_rows(
    ctx: StepContext,
    rule_id: str,
    left_limit: float,
    right_limit: float,
    footprint: Footprint,
    z: int,
    gains: FamilyGains,
    relax: bool,
    margin: float = 0.05,
) -> list[ConstraintRow]:
    """Keep every footprint disk's lateral offset within [-right, +left].

    Disk lateral offset is approximated by d + c_j sin(mu); the curvature
    correction is folded into ``margin``.
    """
    r0 = min_radius(footprint, 0.0, 0.0, 0.0, 0.0, z)
    offsets = [off + footprint.cog_to_center
               for off in disk_center_offsets(footprint, 0.0, 0.0, z)]
    lim_left = left_limit - r0 - margin
    lim_right = right_limit - r0 - margin
    if lim_left <= 0 or lim_right <= 0:
        raise InvalidArgumentError(
            f"containment {rule_id!r}: corridor narrower than the disk radius")
    relax_key = rule_id if relax else None
    c_arr = np.asarray(offsets)
    rows = []
    for limit, left_side, tag in ((lim_left, True, "left"), (lim_right, False, "right")):
        expr = make_containment_expr(limit, c_arr, left_side)
        names = [f"{rule_id}_disk{j}_{tag}" for j in range(z)]
        rows.extend(_rows_batch(ctx.curv_jets, expr, 3, gains.containment,
                                names=names, rule_id=rule_id, relax_key=relax_key))
    return rows


def clearance_rows(
    ctx: StepContext,
    rule_id: str,
    ego_footprint: Footprint,
    clearance: ClearanceSpec,
    z_ego: int,
    instance: Instance,
    sample: InstanceSample,
    z_inst: int,
    gains: FamilyGains,
    relax: bool,
    freeze_speed: bool = True,
    margin: float = 0.0,
) -> list[ConstraintRow]:
    """One row per (ego disk, instance disk) pair.

    With ``freeze_speed`` the clearance laws are evaluated at the current
    speed and held constant inside the chain: relative degree 3, both controls
    act, and the geometry refreshes every control interval. Differentiating
    the speed dependence instead (``freeze_speed=False``) drops the degree to
    2 but leaves the row without steering authority. ``margin`` inflates the
    constraint-side clearances only, so closed-loop grazing of the barrier
    boundary stays inside the rule's true threshold.
    """
    if freeze_speed:
        h_f, h_b, h_l, h_r = clearance.at(ctx.state.v)
        clearance = ClearanceSpec(SpeedLaw(h_f + margin, 0.0), SpeedLaw(h_b + margin, 0.0),
                                  SpeedLaw(h_l + margin, 0.0), SpeedLaw(h_r + margin, 0.0))
    elif margin > 0.0:
        clearance = ClearanceSpec(
            SpeedLaw(clearance.front.base + margin, clearance.front.slope),
            SpeedLaw(clearance.back.base + margin, clearance.back.slope),
            SpeedLaw(clearance.left.base + margin, clearance.left.slope),
            SpeedLaw(clearance.right.base + margin, clearance.right.slope),
        )
    m = clearance_rel_degree(clearance)
    r_inst = min_radius(instance.footprint, 0, 0, 0, 0, z_inst)
    inst_offsets = np.asarray(disk_center_offsets(instance.footprint, 0.0, 0.0, z_inst))
    cos_i, sin_i = math.cos(sample.pose.heading), math.sin(sample.pose.heading)
    vx, vy = sample.velocity
    relax_key = rule_id if relax else None

    # all (ego disk, instance disk) pairs as one array-valued chain
    j_arr = np.repeat(np.arange(1, z_ego + 1), z_inst)
    off_arr = np.tile(inst_offsets, z_ego)
    inst_xy = (Jet(sample.pose.x + off_arr * cos_i, np.full(off_arr.size, vx)),
               Jet(sample.pose.y + off_arr * sin_i, np.full(off_arr.size, vy)))
    expr = make_clearance_expr(ego_footprint, clearance, z_ego, j_arr, r_inst, inst_xy)
    names = [f"{rule_id}_{instance.instance_id}_e{j}i{k}"
             for j in range(1, z_ego + 1) for k in range(z_inst)]
    return _rows_batch(ctx.glob_jets, expr, m, gains.clearance,
                       names=names, rule_id=rule_id, relax_key=relax_key)


def clearance_barrier(
    ego_footprint: Footprint,
    clearance: ClearanceSpec,
    z_ego: int,
    disk_index: int,
    r_inst: float,
    gains: tuple[float, ...],
    l_r: float,
    l_f: float,
    rule_id: str | None = None,
) -> BarrierSpec:
    """Standalone barrier over the extended global state (ego + instance
    disk + its velocity); used by the FD self-checks and degree assertions."""
    m = clearance_rel_degree(clearance)
    return BarrierSpec(
        name=f"clearance_disk{disk_index}",
        rel_degree=m,
        gains=tuple(gains[:m]),
        field=extended_global_field(l_r, l_f),
        expr=make_clearance_expr(ego_footprint, clearance, z_ego, disk_index, r_inst, None),
        n_controls=N_CONTROLS,
        rule_id=rule_id,
    )


def containment_barrier(path: ReferencePath, limit: float, c_off: float,
                        left_side: bool, gains: tuple[float, ...],
                        l_r: float, l_f: float) -> BarrierSpec:
    return BarrierSpec(
        name="containment",
        rel_degree=3,
        gains=tuple(gains[:3]),
        field=curvilinear_field(path, l_r, l_f),
        expr=make_containment_expr(limit, c_off, left_side),
        n_controls=N_CONTROLS,
    )


def bound_barrier(path: ReferencePath, index: int, bound: float, upper: bool,
                  m: int, gains: tuple[float, ...], l_r: float, l_f: float) -> BarrierSpec:
    return BarrierSpec(
        name=f"bound_{index}",
        rel_degree=m,
        gains=tuple(gains[:m]),
        field=curvilinear_field(path, l_r, l_f),
        expr=make_bound_expr(index, bound, upper),
        n_controls=N_CONTROLS,
    )


def lat_accel_barrier(path: ReferencePath, limit: float, sign: float,
                      gains: tuple[float, ...], l_r: float, l_f: float) -> BarrierSpec:
    return BarrierSpec(
        name="lat_accel",
        rel_degree=2,
        gains=tuple(gains[:2]),
        field=curvilinear_field(path, l_r, l_f),
        expr=make_lat_accel_expr(path, limit, sign),
        n_controls=N_CONTROLS,
    )


# ---------------------------------------------------------------------------
# Tracking Lyapunov row.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClfSpec:
    """Tracking CLF after feedback reduction to relative degree one.

    V = c_speed (a + k_speed (v - v_des))^2 + c_lat (d'' + lam2 d' + lam1 d)^2.
    """

    v_des: float = 4.0
    k_speed: float = 1.0
    c_speed: float = 1.0
    c_lat: float = 1.0
    lam1: float = 1.0
    lam2: float = 2.0
    epsilon: float = 0.6
    p_e: float = 1.0

    def __post_init__(self):
        if self.epsilon <= 0 or self.p_e <= 0:
            raise InvalidArgumentError("epsilon and p_e must be positive")


def clf_value_jet(jets, spec: ClfSpec) -> Jet:
    d = jets[1]
    q = jets[4] + spec.k_speed * (jets[3] - spec.v_des)
    sigma = Jet(
        d.c[2] + spec.lam2 * d.c[1] + spec.lam1 * d.c[0],
        d.c[3] + spec.lam2 * d.c[2] + spec.lam1 * d.c[1],
    )
    return spec.c_speed * q.sq() + spec.c_lat * sigma.sq()


def clf_tracking_row(ctx: StepContext, spec: ClfSpec) -> tuple[ConstraintRow, float]:
    """Relaxed CLF row at the current state; returns (row, V)."""
    drift = clf_value_jet(ctx.curv_jets[0], spec)
    lg = np.array([
        clf_value_jet(ctx.curv_jets[1], spec).c[1] - drift.c[1],
        clf_value_jet(ctx.curv_jets[2], spec).c[1] - drift.c[1],
    ])
    row = ConstraintRow(
        coeffs=lg,
        constant=drift.c[1] + spec.epsilon * drift.c[0],
        sense="le",
        relax_key="clf",
        name="clf",
        psi0=drift.c[0],
    )
    return row, drift.c[0]


# ---------------------------------------------------------------------------
# Scenario-level assembly.
# ---------------------------------------------------------------------------


@dataclass
class CoverageTable:
    """Per-rule ego disk counts and per-instance disk counts, chosen once."""

    ego_z: dict[str, int]
    inst_z: dict[str, int]
    worst_radius: dict[str, float]


def clearance_spec_for(rule) -> ClearanceSpec | None:
    """Clearance region laws implied by a clearance rule's parameters."""
    p = rule.params
    if rule.kind in ("pedestrian_clearance", "parked_clearance"):
        return ClearanceSpec.uniform(p["d"], p["eta"])
    if rule.kind == "active_clearance":
        return ClearanceSpec(
            front=SpeedLaw(p["d_front"], p["eta_front"]),
            back=SpeedLaw(min(p["d_left"], p["d_right"]), min(p["eta_left"], p["eta_right"])),
            left=SpeedLaw(p["d_left"], p["eta_left"]),
            right=SpeedLaw(p["d_right"], p["eta_right"]),
        )
    return None


def build_coverage(scenario: Scenario, rules: dict, v_max: float,
                   beta: float = 2.0, z_max: int = 10) -> CoverageTable:
    ego_z: dict[str, int] = {}
    worst: dict[str, float] = {}
    for rid, rule in rules.items():
        spec = clearance_spec_for(rule)
        if spec is None:
            continue
        bounds = {
            "f": (spec.front.at(0.0), spec.front.at(v_max)),
            "b": (spec.back.at(0.0), spec.back.at(v_max)),
            "l": (spec.left.at(0.0), spec.left.at(v_max)),
            "r": (spec.right.at(0.0), spec.right.at(v_max)),
        }
        z, radius = optimize_coverage(scenario.ego.footprint, bounds, beta, z_max)
        ego_z[rid] = z
        worst[rid] = radius
    inst_z: dict[str, int] = {}
    for inst in scenario.instances:
        zero = {side: (0.0, 0.0) for side in "fblr"}
        z, _ = optimize_coverage(inst.footprint, zero, beta, z_max)
        inst_z[inst.instance_id] = z
    return CoverageTable(ego_z, inst_z, worst)


@dataclass
class WorldContext:
    """Everything the per-step QP assembly needs, built once per run."""

    scenario: Scenario
    path: ReferencePath
    coverage: CoverageTable
    gains: FamilyGains
    lane_margin: float
    activation_radius: float
    freeze_clearance_speed: bool = True
    clearance_margin: float = 0.0
    lane_half: float = field(init=False)
    drivable_left: float = field(init=False)
    drivable_right: float = field(init=False)

    def __post_init__(self):
        self.lane_half = self.scenario.ego_lane.width / 2.0
        self.drivable_left = self.scenario.drivable.left_extent
        self.drivable_right = self.scenario.drivable.right_extent

    @property
    def l_r(self) -> float:
        return self.scenario.ego.l_r

    @property
    def l_f(self) -> float:
        return self.scenario.ego.l_f

    def context_at(self, state: EgoState) -> StepContext:
        return StepContext.at(state, self.path, self.l_r, self.l_f)


def assemble_rule_rows(
    world: WorldContext,
    ctx: StepContext,
    rules: dict,
    relaxed: set[str],
    instance_samples: dict[str, InstanceSample],
    detected: set[str] | None = None,
) -> list[ConstraintRow]:
    """Rows for every rule with content at this state.

    ``detected`` restricts instance rows to the sensed set (online); None
    means full information (offline). Instances beyond the activation radius
    produce no rows (their chains are far from binding).
    """
    scenario = world.scenario
    rows: list[ConstraintRow] = []
    for rid, rule in rules.items():
        relax = rid in relaxed
        if rule.kind in ("pedestrian_clearance", "parked_clearance", "active_clearance"):
            spec = clearance_spec_for(rule)
            z_ego = world.coverage.ego_z[rid]
            for inst in scenario.instances:
                if inst.kind != rule.instance_kind:
                    continue
                if detected is not None and inst.instance_id not in detected:
                    continue
                sample = instance_samples[inst.instance_id]
                dist = math.hypot(sample.pose.x - ctx.pose.x, sample.pose.y - ctx.pose.y)
                if dist > world.activation_radius:
                    continue
                rows.extend(clearance_rows(
                    ctx, rid, scenario.ego.footprint, spec, z_ego,
                    inst, sample, world.coverage.inst_z[inst.instance_id],
                    world.gains, relax, world.freeze_clearance_speed,
                    world.clearance_margin))
        elif rule.kind == "lane_keeping":
            rows.extend(containment_rows(
                ctx, rid, world.lane_half, world.lane_half, scenario.ego.footprint,
                3, world.gains, relax, world.lane_margin))
        elif rule.kind == "drivable_area":
            rows.extend(containment_rows(
                ctx, rid, world.drivable_left, world.drivable_right,
                scenario.ego.footprint, 3, world.gains, relax, world.lane_margin))
        elif rule.kind in ("speed_max", "speed_min"):
            rows.extend(speed_rule_rows(ctx, rid, rule.kind, rule.params["v_limit"],
                                        world.gains, relax))
        elif rule.kind == "comfort":
            rows.extend(comfort_rows(ctx, rid, rule.params["a_limit"],
                                     rule.params["a_lat_limit"], world.gains, relax))
    return rows
