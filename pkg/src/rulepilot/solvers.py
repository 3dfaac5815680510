"""Dense convex QP solving with certified infeasibility detection, and the
finite-horizon tracking NLP behind the receding-horizon controller.

The QP solver is a primal-dual predictor-corrector interior-point method over
dense matrices. Problems here are tiny (a handful of variables, tens of rows),
so robustness and a trustworthy infeasible/failed distinction matter far more
than sparsity: the iterative relaxation branches on infeasibility, so a false
"infeasible" silently relaxes rules that did not need relaxing. Infeasibility
is therefore certified by an explicit phase-1 problem rather than guessed from
divergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .dynamics import EgoState, ReferencePath, StateControlBounds, slip_angle
from .errors import InvalidArgumentError

KKT_TOL = 1e-8
REPORT_TOL = 1e-6
PHASE1_TOL = 1e-6
MAX_ITERS = 200


@dataclass
class QpProblem:
    """min 1/2 z'Pz + q'z  s.t.  G z <= h."""

    P: np.ndarray
    q: np.ndarray
    G: np.ndarray
    h: np.ndarray
    var_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        self.q = np.asarray(self.q, dtype=float)
        n = self.q.size
        if self.P.shape != (n, n):
            raise InvalidArgumentError("P and q dimensions disagree")
        self.G = np.asarray(self.G, dtype=float).reshape(-1, n)
        self.h = np.asarray(self.h, dtype=float)
        if self.G.shape[0] != self.h.size:
            raise InvalidArgumentError("G and h dimensions disagree")
        if not (np.all(np.isfinite(self.P)) and np.all(np.isfinite(self.q))
                and np.all(np.isfinite(self.G)) and np.all(np.isfinite(self.h))):
            raise InvalidArgumentError("non-finite problem data")


@dataclass
class QpOutcome:
    status: str  # "optimal" | "infeasible" | "numerical-failure"
    z: np.ndarray | None = None
    objective: float = math.nan
    max_violation: float = math.nan
    infeasibility_bound: float = 0.0
    iterations: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _interior_point(P, q, G, h, z0=None, s0=None, max_iters=MAX_ITERS):
    """Predictor-corrector iterations; returns (z, lam, s, converged, iters).

    Divergence (possible on degenerate boundary cases) is detected by the
    finite-residual check and handled by the callers' fallbacks, so float
    overflow on a diverging iterate is expected rather than exceptional.
    """
    n = q.size
    m = h.size
    z = np.zeros(n) if z0 is None else z0.copy()
    s = np.maximum(h - G @ z, 1.0) if s0 is None else s0.copy()
    lam = np.ones(m)
    reg = 1e-11

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for it in range(1, max_iters + 1):
            rd = P @ z + q + G.T @ lam
            rp = G @ z + s - h
            if not (np.all(np.isfinite(rd)) and np.all(np.isfinite(rp))):
                return z, lam, s, False, it
            mu = float(s @ lam) / m
            if max(np.abs(rd).max(), np.abs(rp).max(), mu) < KKT_TOL:
                return z, lam, s, True, it

            d = s / lam
            kkt = np.zeros((n + m, n + m))
            kkt[:n, :n] = P + reg * np.eye(n)
            kkt[:n, n:] = G.T
            kkt[n:, :n] = G
            kkt[n:, n:] = -np.diag(d)
            try:
                kkt_inv = np.linalg.inv(kkt)
            except np.linalg.LinAlgError:
                return z, lam, s, False, it

            def solve_step(rc):
                rhs = np.concatenate([-rd, -rp - rc / lam])
                sol = kkt_inv @ rhs
                dz, dlam = sol[:n], sol[n:]
                ds = (rc - s * dlam) / lam
                return dz, dlam, ds

            def max_step(v, dv):
                neg = dv < 0
                if not np.any(neg):
                    return 1.0
                return min(1.0, float(np.min(-v[neg] / dv[neg])))

            # affine (predictor) direction
            dz_a, dlam_a, ds_a = solve_step(-s * lam)
            alpha_aff = min(max_step(s, ds_a), max_step(lam, dlam_a))
            mu_aff = float((s + alpha_aff * ds_a) @ (lam + alpha_aff * dlam_a)) / m
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

            # corrector
            dz, dlam, ds = solve_step(-s * lam - ds_a * dlam_a + sigma * mu)
            alpha = 0.99 * min(max_step(s, ds), max_step(lam, dlam))
            z = z + alpha * dz
            lam = lam + alpha * dlam
            s = s + alpha * ds
    return z, lam, s, False, max_iters


def _phase1(G, h):
    """min t^2 s.t. G z - t <= h. Optimal t is the least possible max violation.

    Returns (t_star, z_star, converged, iterations).
    """
    n = G.shape[1]
    m = G.shape[0]
    P1 = np.zeros((n + 1, n + 1))
    P1[-1, -1] = 2.0
    q1 = np.zeros(n + 1)
    G1 = np.hstack([G, -np.ones((m, 1))])
    z0 = np.zeros(n + 1)
    z0[-1] = float(max(np.max(-h), 0.0)) + 1.0
    s0 = h - G1 @ z0
    sol, _, _, converged, iters = _interior_point(P1, q1, G1, h, z0=z0, s0=s0)
    if not converged:
        # the start point is strictly feasible by construction, so the primal
        # active set can always finish the certification
        sol_as, as_ok = _active_set(P1, q1, G1, h, z0)
        if as_ok:
            return float(sol_as[-1]), sol_as[:n].copy(), True, iters
    return float(sol[-1]), sol[:n].copy(), converged, iters


def _eqp_step(P, g, A):
    """min 1/2 p'Pp + g'p s.t. A p = 0 via the null-space method.

    Robust to the badly mixed scales of penalty-weighted QPs where a direct
    saddle-point solve loses digits. Returns (p, multipliers).
    """
    n = g.size
    if A.shape[0] == 0:
        return np.linalg.solve(P + 1e-12 * np.eye(n), -g), np.zeros(0)
    Q, R = np.linalg.qr(A.T, mode="complete")
    k = min(A.shape[0], n)
    diag = np.abs(np.diag(R[:k, :k])) if k else np.zeros(0)
    rank = int(np.sum(diag > 1e-10 * max(1.0, diag.max(initial=0.0))))
    Z = Q[:, rank:]
    if Z.shape[1] == 0:
        p = np.zeros(n)
    else:
        H = Z.T @ P @ Z
        p = Z @ np.linalg.solve(H + 1e-12 * np.eye(Z.shape[1]), -(Z.T @ g))
    lam, *_ = np.linalg.lstsq(A.T, -(g + P @ p), rcond=None)
    return p, lam


def _active_set(P, q, G, h, z0, max_iters=300):
    """Primal active-set fallback for near-degenerate feasible sets.

    Starts from a point feasible to within the phase-1 tolerance; exact on
    boundary optima where the interior-point method stalls. Returns
    (z, converged).
    """
    n = q.size
    z = z0.copy()
    feas_tol = 2e-6
    working: list[int] = [int(i) for i in np.where(G @ z - h > -1e-9)[0][:n]]
    for _ in range(max_iters):
        A = G[working] if working else np.zeros((0, n))
        try:
            p, lam = _eqp_step(P, P @ z + q, A)
        except np.linalg.LinAlgError:
            return z, False

        if np.abs(p).max(initial=0.0) < 1e-9:
            if len(working) == 0 or np.all(lam >= -1e-7):
                return z, True
            working.pop(int(np.argmin(lam)))
            continue

        gp = G @ p
        slack = h - G @ z
        alpha = 1.0
        blocking = -1
        for i in range(G.shape[0]):
            if i in working or gp[i] <= 1e-12:
                continue
            step = max(slack[i], 0.0) / gp[i]
            if step < alpha:
                alpha = step
                blocking = i
        z = z + alpha * p
        if blocking >= 0:
            if len(working) >= n:
                working.pop(0)
            working.append(blocking)
    viol = float(np.max(G @ z - h, initial=0.0))
    return z, viol <= feas_tol


def solve_qp(problem: QpProblem) -> QpOutcome:
    """Solve the QP, certifying infeasibility via phase 1.

    Rows are normalized to unit magnitude first (a positive row scaling leaves
    the feasible set and the optimizer unchanged), so certificates and
    residuals are relative per row. "optimal" carries a scaled constraint
    residual <= 1e-6; "infeasible" carries a strictly positive lower bound on
    the scaled max violation of any point; "numerical-failure" is reported
    distinctly so callers never mistake a solver breakdown for genuine
    infeasibility.
    """
    P, q, G, h = problem.P, problem.q, problem.G, problem.h
    n = q.size
    if G.shape[0] == 0:
        try:
            z = np.linalg.solve(P + 1e-12 * np.eye(n), -q)
        except np.linalg.LinAlgError:
            return QpOutcome(status="numerical-failure")
        return QpOutcome("optimal", z, float(0.5 * z @ P @ z + q @ z), 0.0)

    scale = np.maximum(np.abs(G).max(axis=1), np.abs(h))
    scale = np.maximum(scale, 1e-9)
    G = G / scale[:, None]
    h = h / scale

    t_star, z_feas, ph1_ok, it1 = _phase1(G, h)
    if not ph1_ok:
        return QpOutcome(status="numerical-failure", iterations=it1)
    if t_star > PHASE1_TOL:
        return QpOutcome(status="infeasible", infeasibility_bound=t_star, iterations=it1)

    z, lam, s, converged, iters = _interior_point(P, q, G, h)
    violation = float(np.max(G @ z - h, initial=0.0)) if np.all(np.isfinite(z)) else math.inf
    if not converged or violation > REPORT_TOL:
        # near-degenerate feasible sets (phase-1 value ~ 0) stall the
        # interior-point iteration; fall back to a primal active set from the
        # phase-1 point, which handles boundary optima exactly
        z_as, as_ok = _active_set(P, q, G, h, z_feas)
        violation_as = float(np.max(G @ z_as - h, initial=0.0))
        if as_ok and violation_as <= 2e-6:
            return QpOutcome(
                status="optimal",
                z=z_as,
                objective=float(0.5 * z_as @ P @ z_as + q @ z_as),
                max_violation=violation_as,
                iterations=it1 + iters,
            )
        return QpOutcome(status="numerical-failure", z=z, max_violation=violation,
                         iterations=it1 + iters)
    return QpOutcome(
        status="optimal",
        z=z,
        objective=float(0.5 * z @ P @ z + q @ z),
        max_violation=violation,
        iterations=it1 + iters,
    )


# ---------------------------------------------------------------------------
# Finite-horizon tracking NLP (single shooting, projected quasi-Newton).
# ---------------------------------------------------------------------------


@dataclass
class TrackingWeights:
    lateral: float = 8.0
    heading: float = 2.0
    speed: float = 1.0
    effort: float = 0.05


@dataclass
class NlpProblem:
    horizon: int
    x0: EgoState
    path: ReferencePath
    dt: float
    bounds: StateControlBounds
    v_des: float
    weights: TrackingWeights = field(default_factory=TrackingWeights)
    l_r: float = 2.0
    l_f: float = 2.0

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidArgumentError("horizon must be >= 1")
        if self.dt <= 0:
            raise InvalidArgumentError("dt must be positive")


@dataclass
class NlpResult:
    controls: np.ndarray  # (H, 2)
    states: np.ndarray  # (H + 1, 7) predicted rollout
    cost: float
    stationarity: float
    degraded: bool


def _rollout_with_grad(u_flat: np.ndarray, prob: NlpProblem, want_grad: bool):
    """Cost (and adjoint gradient) of the clipped predictive rollout.

    The predictive model is the series-discretized step; v, a, delta, omega
    are projected onto their boxes each step so predicted states satisfy the
    state limits exactly. Saturated projections pass zero sensitivity.
    """
    H = prob.horizon
    dt = prob.dt
    b = prob.bounds
    w = prob.weights
    lr, lf = prob.l_r, prob.l_f
    ke = lr / (lr + lf)
    u = u_flat.reshape(H, 2)

    xs = np.empty((H + 1, 7))
    xs[0] = prob.x0.to_array()
    kappas = np.empty(H)
    kappa_primes = np.empty(H)
    passes = np.empty((H, 4))  # clip pass-through for v, a, delta, omega

    for k in range(H):
        s, d, mu, v, a, delta, omega = xs[k]
        kap, kap_p = prob.path.kappa_fast(s)
        kappas[k], kappa_primes[k] = kap, kap_p
        beta = slip_angle(delta, lr, lf)
        heading = mu + beta
        denom = 1.0 - d * kap
        denom = denom if abs(denom) > 1e-6 else math.copysign(1e-6, denom)
        s_dot = v * math.cos(heading) / denom

        v_raw = v + a * dt + 0.5 * u[k, 0] * dt * dt
        a_raw = a + u[k, 0] * dt
        delta_raw = delta + omega * dt + 0.5 * u[k, 1] * dt * dt
        omega_raw = omega + u[k, 1] * dt
        v_new = min(max(v_raw, b.v_min), b.v_max)
        a_new = min(max(a_raw, b.a_min), b.a_max)
        delta_new = min(max(delta_raw, b.delta_min), b.delta_max)
        omega_new = min(max(omega_raw, b.omega_min), b.omega_max)
        passes[k] = [v_new == v_raw, a_new == a_raw, delta_new == delta_raw,
                     omega_new == omega_raw]

        xs[k + 1] = [
            s + s_dot * dt,
            d + v * math.sin(heading) * dt,
            mu + (v / lr * math.sin(beta) - kap * s_dot) * dt,
            v_new, a_new, delta_new, omega_new,
        ]

    err = xs[1:]  # states 1..H enter the tracking cost
    cost = float(
        w.lateral * np.sum(err[:, 1] ** 2)
        + w.heading * np.sum(err[:, 2] ** 2)
        + w.speed * np.sum((err[:, 3] - prob.v_des) ** 2)
        + w.effort * np.sum(u * u)
    )
    if not want_grad:
        return cost, None

    grad = np.empty((H, 2))
    l0 = l1 = l2 = l3 = l4 = l5 = l6 = 0.0
    half_dt2 = 0.5 * dt * dt
    for k in range(H - 1, -1, -1):
        d1, mu1, v1 = xs[k + 1, 1], xs[k + 1, 2], xs[k + 1, 3]
        l1 += 2.0 * w.lateral * d1
        l2 += 2.0 * w.heading * mu1
        l3 += 2.0 * w.speed * (v1 - prob.v_des)

        s, d, mu, v, a, delta, omega = xs[k]
        kap, kap_p = kappas[k], kappa_primes[k]
        beta = slip_angle(delta, lr, lf)
        t = math.tan(delta)
        dbeta = ke * (1.0 + t * t) / (1.0 + (ke * t) ** 2)
        heading = mu + beta
        C, S = math.cos(heading), math.sin(heading)
        denom = 1.0 - d * kap
        denom = denom if abs(denom) > 1e-6 else math.copysign(1e-6, denom)
        sd = v * C / denom
        pv, pa, pdel, pom = passes[k]

        # adjoint of the step (hand-unrolled transpose-Jacobian product)
        ds_ds = v * C * d * kap_p / denom**2
        vS_d = v * S / denom
        vC_d2 = v * C * kap / denom**2
        grad[k, 0] = 2.0 * w.effort * u[k, 0] + pv * half_dt2 * l3 + pa * dt * l4
        grad[k, 1] = 2.0 * w.effort * u[k, 1] + pdel * half_dt2 * l5 + pom * dt * l6
        n0 = (1 + ds_ds * dt) * l0 - (kap_p * sd + kap * ds_ds) * dt * l2
        n1 = vC_d2 * dt * l0 + l1 - kap * vC_d2 * dt * l2
        n2 = -vS_d * dt * l0 + v * C * dt * l1 + (1 + kap * vS_d * dt) * l2
        n3 = (C / denom * dt) * l0 + S * dt * l1 \
            + (math.sin(beta) / lr - kap * C / denom) * dt * l2 + pv * l3
        n4 = pv * dt * l3 + pa * l4
        n5 = (-vS_d * l0 + v * C * l1
              + (v / lr * math.cos(beta) + kap * vS_d) * l2) * dbeta * dt + pdel * l5
        n6 = pdel * dt * l5 + pom * l6
        l0, l1, l2, l3, l4, l5, l6 = n0, n1, n2, n3, n4, n5, n6
    return cost, grad.ravel()


def solve_tracking_nlp(prob: NlpProblem) -> NlpResult:
    """Locally optimal control sequence for the tracking problem.

    Single shooting from a cold (zero) start, L-BFGS-B over the stacked
    control sequence with exact box bounds. A line-search breakdown returns
    the best-found sequence flagged degraded rather than raising: the online
    controller only needs a usable reference, not a global optimum.
    """
    H = prob.horizon
    b = prob.bounds
    bounds = [(b.jerk_min, b.jerk_max), (b.steer_accel_min, b.steer_accel_max)] * H
    u0 = np.zeros(2 * H)

    res = minimize(
        lambda uf: _rollout_with_grad(uf, prob, True),
        u0,
        jac=True,
        method="L-BFGS-B",
        bounds=bounds,
        options={"maxiter": 300, "ftol": 1e-12, "gtol": 2e-5},
    )
    u = np.clip(res.x, [bb[0] for bb in bounds], [bb[1] for bb in bounds])
    cost, grad = _rollout_with_grad(u, prob, True)

    lo = np.array([bb[0] for bb in bounds])
    hi = np.array([bb[1] for bb in bounds])
    projected = u - np.clip(u - grad.reshape(-1), lo, hi)
    stationarity = float(np.abs(projected).max(initial=0.0))

    xs = rollout_states(u.reshape(H, 2), prob)
    degraded = stationarity > 1e-4
    return NlpResult(u.reshape(H, 2), xs, cost, stationarity, degraded)


def rollout_states(u: np.ndarray, prob: NlpProblem) -> np.ndarray:
    """Predicted states (H+1, 7) of the clipped rollout under a control plan."""
    H = prob.horizon
    xs = np.empty((H + 1, 7))
    xs[0] = prob.x0.to_array()
    b = prob.bounds
    lr, lf = prob.l_r, prob.l_f
    for k in range(H):
        s, d, mu, v, a, delta, omega = xs[k]
        kap, _ = prob.path.kappa_fast(s)
        beta = slip_angle(delta, lr, lf)
        heading = mu + beta
        denom = 1.0 - d * kap
        denom = denom if abs(denom) > 1e-6 else math.copysign(1e-6, denom)
        s_dot = v * math.cos(heading) / denom
        xs[k + 1] = [
            s + s_dot * prob.dt,
            d + v * math.sin(heading) * prob.dt,
            mu + (v / lr * math.sin(beta) - kap * s_dot) * prob.dt,
            min(max(v + a * prob.dt + 0.5 * u[k, 0] * prob.dt**2, b.v_min), b.v_max),
            min(max(a + u[k, 0] * prob.dt, b.a_min), b.a_max),
            min(max(delta + omega * prob.dt + 0.5 * u[k, 1] * prob.dt**2, b.delta_min), b.delta_max),
            min(max(omega + u[k, 1] * prob.dt, b.omega_min), b.omega_max),
        ]
    return xs
