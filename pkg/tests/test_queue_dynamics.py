import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotlane.domain import Capacities, DemandSample, LaneState
from hotlane.queue_dynamics import queue_step, queueing_time_diff

CAPS = Capacities(30.0, 30.0)
DEMAND = DemandSample(10.0, 60.0)


def test_first_step_of_logit_scenario():
    # lambda1 - zeta*dt evaluated by hand: 1 + 8.63/600
    nxt = queue_step(LaneState(1.0, 2.0), DEMAND, -8.63, CAPS, 1 / 600)
    assert nxt.lambda1 == pytest.approx(1.0143833333333333, abs=1e-15)


def test_zero_residual_freezes_hot_queue():
    assert queue_step(LaneState(3.7, 2.0), DEMAND, 0.0, CAPS, 0.01).lambda1 == 3.7


def test_hot_queue_clamps_at_zero():
    assert queue_step(LaneState(0.001, 2.0), DEMAND, 10.0, CAPS, 1 / 600).lambda1 == 0.0


@pytest.mark.parametrize(
    "lanes, expected",
    [((1.0, 2.0), 1 / 30), ((0.0, 0.0), 0.0), ((2.0, 1.0), -1 / 30)],
)
def test_queueing_time_diff(lanes, expected):
    assert queueing_time_diff(LaneState(*lanes), CAPS) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(
    st.lists(st.floats(-50.0, 50.0), min_size=1, max_size=200),
    st.floats(0.0, 10.0),
    st.floats(0.0, 10.0),
    st.floats(1e-4, 0.5),
)
def test_queues_never_go_negative(zetas, l1, l2, dt):
    state = LaneState(l1, l2)
    for z in zetas:
        state = queue_step(state, DemandSample(5.0, 20.0), z, CAPS, dt)
        assert state.lambda1 >= 0.0 and state.lambda2 >= 0.0


def test_gp_conservation_while_queue_positive():
    rng = np.random.default_rng(1)
    dt, steps = 1 / 600, 2000
    state = LaneState(0.0, 50.0)
    total_inflow = 0.0
    start = state.lambda2
    for _ in range(steps):
        zeta = rng.uniform(-5.0, 5.0)
        demand = DemandSample(10.0, 60.0)
        # GP inflow = SOVs staying plus the HOT surplus routed over, minus nothing else
        q3 = CAPS.c1 - demand.q1 - zeta
        inflow = (demand.q2 - q3) * dt
        state = queue_step(state, demand, zeta, CAPS, dt)
        assert state.lambda2 > 0.0
        total_inflow += inflow
    assert state.lambda2 - start == pytest.approx(total_inflow - CAPS.c2 * dt * steps, abs=1e-9 * steps)


def test_equilibrium_growth_of_gp_queue():
    dt = 1 / 600
    state = LaneState(0.0, 0.0)
    for _ in range(600):
        state = queue_step(state, DEMAND, 0.0, CAPS, dt)
    # w0 = (10 + 60 - 60)/30 = 1/3, so lambda2 grows at c2 * w0 = 10 veh/min
    assert state.lambda2 == pytest.approx(10.0, rel=1e-12)
    assert state.lambda1 == 0.0
