"""Constraint-row construction from high-order barrier functions and relaxed
Lyapunov rows.

A barrier is a scalar function b(x) with b >= 0 required; its relative degree
m is the number of time-derivatives until a control appears. Rows are built
from the penalized-linear class-K chain

    psi_0 = b,   psi_i = psi_{i-1}' + k_i psi_{i-1},

so the emitted inequality is psi_m >= 0 (or >= delta when relaxed), which is
affine in the control because the m-th derivative of b along the flow is
L_f^m b + L_g L_f^{m-1} b u.

Derivatives come from the jet propagation in :mod:`rulepilot.jets`; a
finite-difference self-check (:func:`fd_self_check`) verifies every chain
level independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgumentError
from .jets import Jet, flow_jets

FlowField = Callable[[list[Jet], tuple[float, ...]], list[Jet]]
JetExpr = Callable[[list[Jet]], Jet]

MAX_DEGREE = 3


@dataclass(frozen=True)
class BarrierSpec:
    """A constraint b(x) >= 0 with its chain gains and flow."""

    name: str
    rel_degree: int
    gains: tuple[float, ...]
    field: FlowField
    expr: JetExpr
    n_controls: int
    relaxable: bool = True
    rule_id: str | None = None

    def __post_init__(self):
        if not 1 <= self.rel_degree <= MAX_DEGREE:
            raise InvalidArgumentError(f"relative degree must be in 1..{MAX_DEGREE}")
        if len(self.gains) != self.rel_degree:
            raise InvalidArgumentError("need one class-K gain per chain level")
        if any(k <= 0 for k in self.gains):
            raise InvalidArgumentError("class-K gains must be positive")


@dataclass
class ConstraintRow:
    """coeffs . u + constant  {>=, <=}  (0 | relax variable).

    ``relax_key`` names the slack column this row may consume ("clf" for the
    Lyapunov row, a rule id for relaxed barrier rows, None when hard).
    ``psi0`` keeps the raw constraint value b(x) for statement-level audits.
    """

    coeffs: np.ndarray
    constant: float
    sense: str  # "ge" or "le"
    relax_key: str | None = None
    name: str = ""
    rule_id: str | None = None
    warning: bool = False
    psi0: float = math.nan

    def __post_init__(self):
        if self.sense not in ("ge", "le"):
            raise InvalidArgumentError(f"bad row sense {self.sense!r}")
        if not np.all(np.isfinite(self.coeffs)) or not math.isfinite(self.constant):
            raise InvalidArgumentError(f"non-finite row {self.name!r}")


@dataclass(frozen=True)
class ChainEval:
    """b and its flow derivatives at a state, split into drift and control."""

    derivs: tuple[float, ...]  # (b, b', .., L_f^m b), controls zeroed
    lg: np.ndarray  # L_g L_f^{m-1} b, one entry per control


def chain_from_jets(jet_drift: Jet, jets_controls: Sequence[Jet], m: int) -> ChainEval:
    lg = np.array([jc.c[m] - jet_drift.c[m] for jc in jets_controls])
    return ChainEval(derivs=jet_drift.c[: m + 1], lg=lg)


def evaluate_chain(barrier: BarrierSpec, x: Sequence[float]) -> ChainEval:
    """Evaluate b's Lie-derivative chain at x by jet propagation."""
    zero = (0.0,) * barrier.n_controls
    try:
        drift = barrier.expr(flow_jets(x, zero, barrier.field))
        per_control = []
        for i in range(barrier.n_controls):
            u = tuple(1.0 if j == i else 0.0 for j in range(barrier.n_controls))
            per_control.append(barrier.expr(flow_jets(x, u, barrier.field)))
    except (ValueError, ZeroDivisionError, FloatingPointError) as exc:
        raise InvalidArgumentError(
            f"barrier {barrier.rule_id or barrier.name!r} is not differentiable "
            f"at this state: {exc}") from exc
    return chain_from_jets(drift, per_control, barrier.rel_degree)


def chain_coefficients(gains: Sequence[float]) -> list[float]:
    """Coefficients a_i with psi_m = sum_i a_i * d^i b/dt^i (a_m = 1)."""
    coeffs = [1.0]
    for k in gains:
        nxt = [k * coeffs[0]]
        for i in range(1, len(coeffs)):
            nxt.append(coeffs[i - 1] + k * coeffs[i])
        nxt.append(coeffs[-1])
        coeffs = nxt
    return coeffs


def psi_values(derivs: Sequence[float], gains: Sequence[float]) -> tuple[float, ...]:
    """psi_0 .. psi_{m-1} from the raw derivatives and gains."""
    values = []
    coeffs = [1.0]
    for level in range(len(gains)):
        values.append(sum(c * derivs[i] for i, c in enumerate(coeffs)))
        k = gains[level]
        nxt = [k * coeffs[0]]
        for i in range(1, len(coeffs)):
            nxt.append(coeffs[i - 1] + k * coeffs[i])
        nxt.append(coeffs[-1])
        coeffs = nxt
    return tuple(values)


@dataclass(frozen=True)
class PsiSequence:
    values: tuple[float, ...]
    memberships: tuple[bool, ...]

    @property
    def in_all_sets(self) -> bool:
        return all(self.memberships)


def psi_sequence(barrier: BarrierSpec, x: Sequence[float]) -> PsiSequence:
    """The chain values psi_0..psi_{m-1} and membership in each C_i."""
    chain = evaluate_chain(barrier, x)
    values = psi_values(chain.derivs, barrier.gains)
    return PsiSequence(values, tuple(v >= 0.0 for v in values))


def row_from_chain(
    chain: ChainEval,
    gains: Sequence[float],
    *,
    name: str = "",
    rule_id: str | None = None,
    relax_key: str | None = None,
) -> ConstraintRow:
    coeffs = chain_coefficients(gains)
    constant = sum(c * chain.derivs[i] for i, c in enumerate(coeffs[:-1]))
    constant += chain.derivs[len(gains)]
    psi = psi_values(chain.derivs, gains)
    return ConstraintRow(
        coeffs=chain.lg.copy(),
        constant=constant,
        sense="ge",
        relax_key=relax_key,
        name=name,
        rule_id=rule_id,
        warning=any(v < 0.0 for v in psi),
        psi0=chain.derivs[0],
    )


def hocbf_row(barrier: BarrierSpec, x: Sequence[float], relax: bool = False) -> ConstraintRow:
    """The QP inequality for one barrier at one state.

    States outside the chain's invariant sets still yield a row (the
    iterative relaxation needs rows at infeasibility boundaries); the
    ``warning`` flag records that the forward-invariance guarantee is void.
    """
    if relax and not barrier.relaxable:
        raise InvalidArgumentError(f"barrier {barrier.name!r} is not relaxable")
    return row_from_chain(
        evaluate_chain(barrier, x),
        barrier.gains,
        name=barrier.name,
        rule_id=barrier.rule_id,
        relax_key=(barrier.rule_id or barrier.name) if relax else None,
    )


# ---------------------------------------------------------------------------
# Relaxed CLF rows.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClfLyapunov:
    """A Lyapunov function with relative degree one (after feedback reduction).

    ``expr`` maps state jets to the V jet; only the value and first derivative
    are used, so expressions may build that jet directly from chain pieces.
    """

    field: FlowField
    expr: JetExpr
    epsilon: float
    n_controls: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidArgumentError("epsilon must be positive")


def clf_row(clf: ClfLyapunov, x: Sequence[float]) -> tuple[ConstraintRow, float]:
    """Relaxed stabilization row: L_f V + L_g V u + eps V <= delta_e.

    Returns the row and V(x) for decay diagnostics.
    """
    zero = (0.0,) * clf.n_controls
    v_drift = clf.expr(flow_jets(x, zero, clf.field))
    lg = np.empty(clf.n_controls)
    for i in range(clf.n_controls):
        u = tuple(1.0 if j == i else 0.0 for j in range(clf.n_controls))
        lg[i] = clf.expr(flow_jets(x, u, clf.field)).c[1] - v_drift.c[1]
    constant = v_drift.c[1] + clf.epsilon * v_drift.c[0]
    row = ConstraintRow(coeffs=lg, constant=constant, sense="le", relax_key="clf", name="clf")
    return row, v_drift.c[0]


# ---------------------------------------------------------------------------
# Finite-difference self-check (independent oracle for the jet chains).
# ---------------------------------------------------------------------------


def _flow_value(field: FlowField, x: np.ndarray, u: tuple[float, ...]) -> np.ndarray:
    jets = flow_jets(x, u, field)
    return np.array([j.c[1] for j in jets])


def fd_self_check(
    barrier: BarrierSpec,
    x: Sequence[float],
    h: float = 1e-5,
) -> dict[str, float]:
    """Relative error of each chain level against cascaded finite differences.

    Level k's analytic value is compared with the directional derivative of
    the (analytic) level k-1 closure along the drift field; the control
    coefficients are compared with the same closure differentiated along the
    control columns. Each level therefore only relies on first-order FD.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    zero = (0.0,) * barrier.n_controls

    def level(y: np.ndarray, k: int) -> float:
        return barrier.expr(flow_jets(y, zero, barrier.field)).c[k]

    def grad(fn, y: np.ndarray) -> np.ndarray:
        g = np.empty(n)
        for i in range(n):
            step = h * max(1.0, abs(y[i]))
            yp, ym = y.copy(), y.copy()
            yp[i] += step
            ym[i] -= step
            g[i] = (fn(yp) - fn(ym)) / (2.0 * step)
        return g

    drift = _flow_value(barrier.field, x, zero)
    chain = evaluate_chain(barrier, x)
    errors: dict[str, float] = {}
    for k in range(1, barrier.rel_degree + 1):
        fd = float(grad(lambda y: level(y, k - 1), x) @ drift)
        scale = max(1.0, abs(chain.derivs[k]))
        errors[f"level_{k}"] = abs(fd - chain.derivs[k]) / scale

    top = barrier.rel_degree - 1
    g_prev = grad(lambda y: level(y, top), x)
    for i in range(barrier.n_controls):
        u = tuple(1.0 if j == i else 0.0 for j in range(barrier.n_controls))
        g_col = _flow_value(barrier.field, x, u) - drift
        fd = float(g_prev @ g_col)
        scale = max(1.0, abs(chain.lg[i]))
        errors[f"lg_{i}"] = abs(fd - chain.lg[i]) / scale
    return errors


def lowest_control_level(barrier: BarrierSpec, x: Sequence[float], tol: float = 1e-9) -> int | None:
    """First derivative order at which any control coefficient is nonzero."""
    zero = (0.0,) * barrier.n_controls
    drift = barrier.expr(flow_jets(x, zero, barrier.field))
    for level in range(1, MAX_DEGREE + 1):
        for i in range(barrier.n_controls):
            u = tuple(1.0 if j == i else 0.0 for j in range(barrier.n_controls))
            jc = barrier.expr(flow_jets(x, u, barrier.field))
            if abs(jc.c[level] - drift.c[level]) > tol:
                return level
    return None
