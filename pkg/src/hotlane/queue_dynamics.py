"""Discrete point-queue updates for the HOT and GP lane groups.

The vanishing-queue rate ``-lambda/eps`` of the continuous model is taken with
``eps = dt``, which turns each update into a clamp at zero.
"""
from __future__ import annotations

from .domain import Capacities, DemandSample, LaneState


def queue_step(state: LaneState, demand: DemandSample, zeta: float, caps: Capacities, dt: float) -> LaneState:
    lambda1 = max(0.0, state.lambda1 - zeta * dt)
    lambda2 = max(0.0, state.lambda2 + (demand.q1 + demand.q2 - caps.c1 - caps.c2 + zeta) * dt)
    return LaneState(lambda1, lambda2)


def queueing_time_diff(state: LaneState, caps: Capacities) -> float:
    """GP queueing time minus HOT queueing time, in minutes. May be negative."""
    return state.lambda2 / caps.c2 - state.lambda1 / caps.c1
