"""Closed-loop dynamic pricing for high-occupancy-toll lanes."""
from ._accel import NUMBA_ENABLED
from .domain import (
    Capacities,
    ConstantDemand,
    ControllerState,
    DemandSample,
    Gains,
    LaneState,
    PoissonDemand,
    ScenarioConfig,
    ScenarioError,
    StepRecord,
    validate_scenario,
)
from .lane_choice import BurrVot, ExponentialVot, GeneralAffineModel, LogitModel, UeModel
from .sim_engine import NumericAbort, SimTrace, detect_convergence, run

__version__ = "0.1.0"
