"""Core value types and scenario validation.

Units are fixed everywhere in the package: time in minutes, counts in
vehicles, money in dollars. Every rate is per minute.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Union

if TYPE_CHECKING:  # pragma: no cover
    from .lane_choice import LaneChoiceModel

STEP_TOLERANCE = 1e-9


class ScenarioError(ValueError):
    """Raised when a scenario violates a hard invariant."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class Capacities:
    c1: float  # HOT bottleneck, veh/min
    c2: float  # GP bottleneck, veh/min


@dataclass(frozen=True)
class DemandSample:
    q1: float  # HOV arrivals, veh/min
    q2: float  # SOV arrivals, veh/min


@dataclass(frozen=True)
class LaneState:
    lambda1: float  # HOT queue, veh
    lambda2: float  # GP queue, veh


@dataclass(frozen=True)
class ControllerState:
    a: float  # price slope, $/min
    b: float  # price offset, $


@dataclass(frozen=True)
class Gains:
    k1: float  # $/veh/min^2
    k2: float  # $/veh/min
    k3: float  # $/veh/min
    k4: float  # $/veh

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.k1, self.k2, self.k3, self.k4)


@dataclass(frozen=True)
class ConstantDemand:
    q1: float
    q2: float

    kind = "constant"


@dataclass(frozen=True)
class PoissonDemand:
    """Poisson counts drawn once per block and held as a rate for the block."""

    mean1: float
    mean2: float
    resample_every: float = 1.0

    kind = "poisson"


DemandSpec = Union[ConstantDemand, PoissonDemand]


@dataclass(frozen=True)
class StepRecord:
    t: float
    q1: float
    q2: float
    q3: float
    w: float
    u_raw: float
    u_applied: float
    p: float
    zeta: float
    lambda1: float
    lambda2: float
    a: float
    b: float
    clamped: bool
    w_degenerate: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    capacities: Capacities
    gains: Gains
    initial_lanes: LaneState
    initial_controller: ControllerState
    dt: float
    horizon: float
    demand_spec: DemandSpec
    choice_model: "LaneChoiceModel"
    rng_seed: int = 0
    price_floor_enabled: bool = True
    estimation_enabled: bool = True
    name: str = ""

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class ValidationResult:
    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _positive(value: Any, name: str, errors: list[str]) -> None:
    if not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        errors.append(f"{name} must be a finite positive number, got {value!r}")


def _nonnegative(value: Any, name: str, errors: list[str]) -> None:
    if not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
        errors.append(f"{name} must be a finite non-negative number, got {value!r}")


def _finite(value: Any, name: str, errors: list[str]) -> None:
    if not isinstance(value, (int, float)) or not math.isfinite(value):
        errors.append(f"{name} must be finite, got {value!r}")


def validate_scenario(cfg: ScenarioConfig) -> ValidationResult:
    """Check every invariant of ``cfg``.

    Hard violations go to ``errors``. Breaches of the standing traffic
    assumptions (HOV demand below HOT capacity, congested system) are only
    ``warnings``: the simulation is still well defined.
    """
    res = ValidationResult()
    err, warn = res.errors, res.warnings

    caps = cfg.capacities
    _positive(caps.c1, "capacities.c1", err)
    _positive(caps.c2, "capacities.c2", err)
    for name in ("k1", "k2", "k3", "k4"):
        _positive(getattr(cfg.gains, name), f"gains.{name}", err)
    _nonnegative(cfg.initial_lanes.lambda1, "initial_lanes.lambda1", err)
    _nonnegative(cfg.initial_lanes.lambda2, "initial_lanes.lambda2", err)
    _finite(cfg.initial_controller.a, "initial_controller.a", err)
    _finite(cfg.initial_controller.b, "initial_controller.b", err)
    _positive(cfg.dt, "dt", err)
    _positive(cfg.horizon, "horizon", err)
    if isinstance(cfg.dt, (int, float)) and isinstance(cfg.horizon, (int, float)) and cfg.dt > 0 and cfg.horizon > 0:
        ratio = cfg.horizon / cfg.dt
        n = round(ratio)
        if n < 1:
            err.append(f"horizon {cfg.horizon} is shorter than one step of {cfg.dt}")
        elif abs(ratio - n) > STEP_TOLERANCE * ratio:
            err.append(f"horizon/dt = {ratio!r} is not a whole number of steps")

    spec = cfg.demand_spec
    if isinstance(spec, ConstantDemand):
        _nonnegative(spec.q1, "demand.q1", err)
        _nonnegative(spec.q2, "demand.q2", err)
        mean1, mean2 = spec.q1, spec.q2
    elif isinstance(spec, PoissonDemand):
        _positive(spec.mean1, "demand.mean1", err)
        _positive(spec.mean2, "demand.mean2", err)
        _positive(spec.resample_every, "demand.resample_every", err)
        if isinstance(cfg.dt, (int, float)) and spec.resample_every < cfg.dt:
            err.append("demand.resample_every must be >= dt")
        mean1, mean2 = spec.mean1, spec.mean2
    else:
        err.append(f"unknown demand spec {spec!r}")
        mean1 = mean2 = None

    try:
        err.extend(cfg.choice_model.validate())
    except AttributeError:
        err.append(f"unsupported choice model {cfg.choice_model!r}")

    if not err and mean1 is not None:
        if mean1 >= caps.c1:
            warn.append("HOV demand exceeds HOT capacity (q1 >= c1)")
        if mean1 + mean2 <= caps.c1 + caps.c2:
            warn.append("system is not congested (q1 + q2 <= c1 + c2)")
    return res


def require_valid(cfg: ScenarioConfig) -> ValidationResult:
    res = validate_scenario(cfg)
    if res.errors:
        raise ScenarioError(res.errors)
    return res
