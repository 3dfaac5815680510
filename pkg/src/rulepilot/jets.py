"""Truncated Taylor propagation of time derivatives along a system flow.

A ``Jet`` carries a value and its first three raw time derivatives. Building
the state jets of an ODE x' = F(x, u) with u held constant, then evaluating a
constraint expression on them, yields the constraint's value and Lie
derivatives exactly (to the stored order): with u constant, d^k b / dt^k at
order k = relative degree equals L_f^k b + L_g L_f^{k-1} b u, and lower orders
carry no control. The arithmetic below is ordinary product/chain rule written
out to third order; nothing symbolic happens at runtime.

Components may be floats or numpy arrays: an expression evaluated with
array-valued constants yields one chain per element through the exact same
propagation rules (used to batch all disk-pair rows of one constraint).
"""

from __future__ import annotations

import math

import numpy as np

ORDER = 3  # derivatives carried beyond the value


def _sin(x):
    return math.sin(x) if type(x) is float else np.sin(x)


def _cos(x):
    return math.cos(x) if type(x) is float else np.cos(x)


def _tan(x):
    return math.tan(x) if type(x) is float else np.tan(x)


def _atan(x):
    return math.atan(x) if type(x) is float else np.arctan(x)


def _sqrt(x):
    return math.sqrt(x) if type(x) is float else np.sqrt(x)


class Jet:
    __slots__ = ("c",)

    # defer mixed ndarray/Jet arithmetic to this class (never broadcast Jets)
    __array_ufunc__ = None
    __array_priority__ = 1000

    def __init__(self, c0: float, c1: float = 0.0, c2: float = 0.0, c3: float = 0.0):
        self.c = (c0, c1, c2, c3)

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self.c, other.c
            return Jet(a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3])
        a = self.c
        return Jet(a[0] + other, a[1], a[2], a[3])

    __radd__ = __add__

    def __neg__(self):
        a = self.c
        return Jet(-a[0], -a[1], -a[2], -a[3])

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a = self.c
        if isinstance(other, Jet):
            b = other.c
            return Jet(
                a[0] * b[0],
                a[1] * b[0] + a[0] * b[1],
                a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2],
                a[3] * b[0] + 3.0 * a[2] * b[1] + 3.0 * a[1] * b[2] + a[0] * b[3],
            )
        return Jet(a[0] * other, a[1] * other, a[2] * other, a[3] * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / other)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    # -- univariate composition (Faa di Bruno to third order) ----------------

    def compose(self, f0: float, f1: float, f2: float, f3: float) -> "Jet":
        g = self.c
        return Jet(
            f0,
            f1 * g[1],
            f2 * g[1] * g[1] + f1 * g[2],
            f3 * g[1] ** 3 + 3.0 * f2 * g[1] * g[2] + f1 * g[3],
        )

    def reciprocal(self) -> "Jet":
        x = self.c[0]
        inv = 1.0 / x
        return self.compose(inv, -inv * inv, 2.0 * inv**3, -6.0 * inv**4)

    def sq(self) -> "Jet":
        return self * self

    def sqrt(self) -> "Jet":
        x = self.c[0]
        r = _sqrt(x)
        return self.compose(r, 0.5 / r, -0.25 / (x * r), 0.375 / (x * x * r))

    def sin(self) -> "Jet":
        s, c = _sin(self.c[0]), _cos(self.c[0])
        return self.compose(s, c, -s, -c)

    def cos(self) -> "Jet":
        s, c = _sin(self.c[0]), _cos(self.c[0])
        return self.compose(c, -s, -c, s)

    def tan(self) -> "Jet":
        t = _tan(self.c[0])
        sec2 = 1.0 + t * t
        return self.compose(t, sec2, 2.0 * sec2 * t, 2.0 * sec2 * (sec2 + 2.0 * t * t))

    def atan(self) -> "Jet":
        x = self.c[0]
        q = 1.0 + x * x
        return self.compose(_atan(x), 1.0 / q, -2.0 * x / (q * q), (6.0 * x * x - 2.0) / q**3)

    def __repr__(self):
        return f"Jet{self.c}"


def constant(x: float) -> Jet:
    return Jet(float(x))


def affine(value: float, rate: float) -> Jet:
    """Jet of a quantity with constant rate (e.g. constant-velocity motion)."""
    return Jet(float(value), float(rate))


def flow_jets(x0, u, field) -> list[Jet]:
    """State jets of x' = field(x_jets, u) with u held constant.

    ``field`` maps a list of state Jets (plus the constant control tuple) to
    the list of derivative Jets. Each sweep lifts the known order by one:
    after the k-th sweep the jets are exact through order k.
    """
    jets = [Jet(float(v)) for v in x0]
    for order in range(1, ORDER + 1):
        fx = field(jets, u)
        jets = [
            Jet(*(j.c[:order] + (f.c[order - 1],) + j.c[order + 1:]))
            for j, f in zip(jets, fx)
        ]
    return jets
