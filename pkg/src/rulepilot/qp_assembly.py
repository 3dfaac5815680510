"""Turn constraint rows plus control boxes into the dense QP form.

Decision vector layout: [u_jerk, u_steer, slack_0, slack_1, ...] where the
slack order is "clf" first (when present) followed by relaxed rule ids in
sorted order.
"""

from __future__ import annotations

import numpy as np

from .cbf_clf import ConstraintRow
from .dynamics import StateControlBounds
from .solvers import QpProblem


def slack_order(rows: list[ConstraintRow]) -> list[str]:
    keys = {row.relax_key for row in rows if row.relax_key is not None}
    ordered = []
    if "clf" in keys:
        ordered.append("clf")
        keys.discard("clf")
    ordered.extend(sorted(keys))
    return ordered


def build_qp(
    rows: list[ConstraintRow],
    bounds: StateControlBounds,
    control_weight: float,
    slack_penalties: dict[str, float],
    u_ref: np.ndarray | None = None,
) -> tuple[QpProblem, list[str]]:
    """Assemble min w||u - u_ref||^2 + sum p_k slack_k^2 over the rows."""
    keys = slack_order(rows)
    col = {key: 2 + i for i, key in enumerate(keys)}
    n = 2 + len(keys)

    G_rows, h_vals = [], []
    for row in rows:
        g = np.zeros(n)
        if row.sense == "ge":
            g[0:2] = -row.coeffs
            if row.relax_key is not None:
                g[col[row.relax_key]] = 1.0
            h_vals.append(row.constant)
        else:
            g[0:2] = row.coeffs
            if row.relax_key is not None:
                g[col[row.relax_key]] = -1.0
            h_vals.append(-row.constant)
        G_rows.append(g)

    for i, (lo, hi) in enumerate(((bounds.jerk_min, bounds.jerk_max),
                                  (bounds.steer_accel_min, bounds.steer_accel_max))):
        e = np.zeros(n)
        e[i] = 1.0
        G_rows.append(e.copy())
        h_vals.append(hi)
        G_rows.append(-e)
        h_vals.append(-lo)

    diag = [control_weight, control_weight] + [slack_penalties[k] for k in keys]
    P = 2.0 * np.diag(diag)
    q = np.zeros(n)
    if u_ref is not None:
        q[0:2] = -2.0 * control_weight * np.asarray(u_ref, dtype=float)

    G = np.array(G_rows).reshape(-1, n)
    h = np.array(h_vals)
    return QpProblem(P, q, G, h, var_names=tuple(["u_jerk", "u_steer"] + keys)), keys
