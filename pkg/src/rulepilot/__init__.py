"""Rule-hierarchy-aware trajectory synthesis and pass/fail evaluation.

Controls are synthesized by barrier/Lyapunov quadratic programs that relax a
totally ordered rule hierarchy as little as possible; candidate trajectories
are judged by searching for a strictly less-violating alternative.
"""

from .config import EngineConfig, OfflineConfig, OnlineConfig
from .dynamics import Control, EgoState, ReferencePath, StateControlBounds, build_reference
from .errors import (
    InvalidArgumentError,
    NoSolutionError,
    SingularStateError,
    SolverFailureError,
    ValidationError,
)
from .evaluation import Verdict, evaluate_candidate, realize_candidate
from .geometry import ClearanceSpec, DiskCoverage, Footprint, Pose, SpeedLaw
from .offline import OfflineResult, run_offline, tune_parameters
from .online import OnlineResult, run_online
from .rules import (
    RuleDef,
    RuleHierarchy,
    TrajectoryRecord,
    ViolationReport,
    build_active_hierarchy,
    compare_trajectories,
    score_trajectory,
    sorted_power_set,
)
from .scenario import DrivableArea, EgoSpec, Instance, Lane, Scenario
from .solvers import QpOutcome, QpProblem, solve_qp, solve_tracking_nlp

__version__ = "0.1.0"

__all__ = [
    "EngineConfig", "OfflineConfig", "OnlineConfig",
    "Control", "EgoState", "ReferencePath", "StateControlBounds", "build_reference",
    "InvalidArgumentError", "NoSolutionError", "SingularStateError",
    "SolverFailureError", "ValidationError",
    "Verdict", "evaluate_candidate", "realize_candidate",
    "ClearanceSpec", "DiskCoverage", "Footprint", "Pose", "SpeedLaw",
    "OfflineResult", "run_offline", "tune_parameters",
    "OnlineResult", "run_online",
    "RuleDef", "RuleHierarchy", "TrajectoryRecord", "ViolationReport",
    "build_active_hierarchy", "compare_trajectories", "score_trajectory",
    "sorted_power_set",
    "DrivableArea", "EgoSpec", "Instance", "Lane", "Scenario",
    "QpOutcome", "QpProblem", "solve_qp", "solve_tracking_nlp",
]
