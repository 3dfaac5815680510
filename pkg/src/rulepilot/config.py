"""Controller configuration: shared engine knobs plus offline/online extras.

Relaxation penalties follow the priority ladder: a rule in priority class p
gets penalty weight p_base ** p, so higher-priority rules are pushed harder
toward zero slack.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

from .errors import InvalidArgumentError
from .solvers import TrackingWeights
from .vehicle_constraints import ClfSpec, FamilyGains


@dataclass(frozen=True)
class EngineConfig:
    clf: ClfSpec = field(default_factory=ClfSpec)
    gains: FamilyGains = field(default_factory=FamilyGains)
    control_weight: float = 1.0
    p_base: float = 10.0
    delta_zero_threshold: float = 1e-4
    lane_margin: float = 0.05
    clearance_margin: float = 0.05
    activation_radius: float = 30.0
    coverage_beta: float = 2.0
    coverage_z_max: int = 10
    clearance_speed_in_chain: bool = False
    curvature_smoothing: float | None = None
    require_relaxed: tuple[str, ...] = ()

    def __post_init__(self):
        if self.p_base <= 1.0:
            raise InvalidArgumentError("p_base must exceed 1 so penalties grow with priority")
        if self.control_weight <= 0:
            raise InvalidArgumentError("control_weight must be positive")

    def penalty_for(self, priority: int) -> float:
        return self.p_base ** priority


@dataclass(frozen=True)
class OfflineConfig(EngineConfig):
    tuning_budget: int = 12

    def tuned(self, **clf_updates) -> "OfflineConfig":
        return replace(self, clf=replace(self.clf, **clf_updates))


@dataclass(frozen=True)
class OnlineConfig(EngineConfig):
    horizon_s: float = 10.0
    feasibility_horizon_s: float = 10.0
    sensing_radius: float = 20.0
    mpc_weights: TrackingWeights = field(default_factory=TrackingWeights)

    def __post_init__(self):
        super().__post_init__()
        if not 0 < self.feasibility_horizon_s <= self.horizon_s:
            raise InvalidArgumentError("need 0 < feasibility horizon <= MPC horizon")
        if self.sensing_radius <= 0:
            raise InvalidArgumentError("sensing radius must be positive")

    def steps(self, dt: float) -> tuple[int, int]:
        h = max(1, int(round(self.horizon_s / dt)))
        ht = max(1, int(round(self.feasibility_horizon_s / dt)))
        return h, min(ht, h)


def config_to_dict(cfg) -> dict:
    return asdict(cfg)


def offline_config_from_dict(data: dict) -> OfflineConfig:
    return _config_from_dict(OfflineConfig, data)


def online_config_from_dict(data: dict) -> OnlineConfig:
    return _config_from_dict(OnlineConfig, data)


def _config_from_dict(cls, data: dict):
    data = dict(data or {})
    kwargs = {}
    if "clf" in data:
        kwargs["clf"] = ClfSpec(**data.pop("clf"))
    if "gains" in data:
        raw = data.pop("gains")
        kwargs["gains"] = FamilyGains(**{k: tuple(v) for k, v in raw.items()})
    if "mpc_weights" in data and cls is OnlineConfig:
        kwargs["mpc_weights"] = TrackingWeights(**data.pop("mpc_weights"))
    data.pop("mpc_weights", None)
    if "require_relaxed" in data:
        kwargs["require_relaxed"] = tuple(data.pop("require_relaxed"))
    known = set(cls.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {sorted(unknown)}")
    kwargs.update(data)
    return cls(**kwargs)
