"""Affine price law driven by two integral controllers.

The controller only sees the measured queueing-time difference ``w``, the HOT
queue ``lambda1`` and the HOT residual capacity ``zeta``. It never consults a
lane-choice or traffic-flow model, so this module imports neither.
"""
from __future__ import annotations

from .domain import ControllerState, Gains


def compute_price(ctrl: ControllerState, w: float, floor: bool = True) -> tuple[float, float]:
    """Return ``(u_raw, u_applied)`` for ``u = a*w + b``."""
    u_raw = ctrl.a * w + ctrl.b
    u_applied = max(0.0, u_raw) if floor else u_raw
    return u_raw, u_applied


def controller_step(ctrl: ControllerState, lambda1: float, zeta: float, gains: Gains, dt: float) -> ControllerState:
    # No anti-windup: both integrators see the true errors even while the price is floored.
    a = ctrl.a + (gains.k1 * lambda1 - gains.k2 * zeta) * dt
    b = ctrl.b + (gains.k3 * lambda1 - gains.k4 * zeta) * dt
    return ControllerState(a, b)
