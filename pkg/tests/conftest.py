import pytest

from hotlane import (
    Capacities,
    ConstantDemand,
    ControllerState,
    ExponentialVot,
    Gains,
    LaneState,
    LogitModel,
    ScenarioConfig,
    UeModel,
)
from hotlane.domain import DemandSample

ACCEPTANCE_LINES: list[str] = []

CAPS = Capacities(30.0, 30.0)
DEMAND = DemandSample(10.0, 60.0)
GAINS = Gains(0.1, 0.1, 0.2, 0.2)
DT = 0.1 / 60


def make_config(model=None, **overrides) -> ScenarioConfig:
    fields = dict(
        capacities=CAPS,
        gains=GAINS,
        initial_lanes=LaneState(1.0, 2.0),
        initial_controller=ControllerState(0.25, 0.1),
        dt=DT,
        horizon=20.0,
        demand_spec=ConstantDemand(10.0, 60.0),
        choice_model=LogitModel(0.5, 1.0) if model is None else model,
        rng_seed=0,
    )
    fields.update(overrides)
    return ScenarioConfig(**fields)


@pytest.fixture
def logit_cfg():
    return make_config(LogitModel(0.5, 1.0), name="logit-constant")


@pytest.fixture
def ue_cfg():
    return make_config(UeModel(ExponentialVot(2.0)), name="ue-constant")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
