"""Exception types shared across the engine.

The CLI maps these onto exit codes (validation -> 2, no solution /
emergency -> 3, solver failure -> 4).
"""

from __future__ import annotations


class InvalidArgumentError(ValueError):
    """A caller violated an operation's preconditions."""


class SingularStateError(RuntimeError):
    """The curvilinear model was evaluated at a singular (d, kappa) pair."""

    def __init__(self, d: float, kappa: float):
        super().__init__(f"singular denominator 1 - d*kappa at d={d:.6g}, kappa={kappa:.6g}")
        self.d = d
        self.kappa = kappa


class ValidationError(ValueError):
    """Schema or semantic validation failure, with a JSON pointer."""

    def __init__(self, pointer: str, message: str):
        super().__init__(f"{pointer}: {message}")
        self.pointer = pointer
        self.detail = message


class NoSolutionError(RuntimeError):
    """Every relaxation level was infeasible (or emergency stop engaged)."""


class SolverFailureError(RuntimeError):
    """A solver failed numerically (distinct from certified infeasibility)."""
