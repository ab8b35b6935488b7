"""Post-hoc checks: costs, the throughput sweep, equilibrium and linear stability."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Capacities, ConstantDemand, DemandSample, Gains, ScenarioConfig
from .lane_choice import LaneChoiceModel, affine_derivatives_at_zero
from .sim_engine import SimTrace, detect_convergence, run


class AssumptionViolation(ValueError):
    """A standing assumption of the analysis does not hold for the inputs."""


@dataclass(frozen=True)
class CostBreakdown:
    phi2: float  # queueing cost of SOVs staying on GP, $
    phi3: float  # tolls paid, $

    @property
    def phi(self) -> float:
        return self.phi2 + self.phi3


@dataclass(frozen=True)
class SweepPoint:
    q3: float
    phi2: float
    phi3: float

    @property
    def phi(self) -> float:
        return self.phi2 + self.phi3


@dataclass(frozen=True)
class StabilityReport:
    c: float
    t_eval: float
    mode1: np.ndarray  # queue-free mode, one eigenvalue
    mode2: np.ndarray  # queue-present mode, two eigenvalues
    stable: bool
    stiff: bool = False  # some |s| > 2/dt: explicit stepping at dt would diverge

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([self.mode1, self.mode2])


# --------------------------------------------------------------------------- #
# Costs
# --------------------------------------------------------------------------- #


def cost_integrals(dt: float, q2, q3, u, w2, pi_bar) -> CostBreakdown:
    """Left Riemann sums of the toll and GP queueing costs."""
    q2, q3, u, w2, pi_bar = (np.asarray(v, dtype=float) for v in (q2, q3, u, w2, pi_bar))
    stay = q2 - q3
    gp = np.where(stay > 0.0, stay * w2 * np.where(stay > 0.0, pi_bar, 0.0), 0.0)
    paid = np.where(q3 > 0.0, q3 * u, 0.0)
    return CostBreakdown(float(gp.sum() * dt), float(paid.sum() * dt))


def gp_mean_vot(model: LaneChoiceModel, u, w) -> np.ndarray:
    """Mean VOT of GP-staying SOVs, per step, under ``model``'s semantics."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    out = np.empty(u.shape)
    cache: dict[float, float] = {}
    for i, (ui, wi) in enumerate(zip(u, w)):
        x = ui / wi if wi > 0.0 else math.inf
        if x not in cache:
            cache[x] = model.mean_vot_below(x) if x > 0.0 else 0.0
        out[i] = cache[x]
    return out


def total_cost(trace: SimTrace, model: LaneChoiceModel | None = None) -> CostBreakdown:
    model = trace.config.choice_model if model is None else model
    w2 = trace.lambda2 / trace.config.capacities.c2
    pi_bar = gp_mean_vot(model, trace.u_applied, trace.w)
    return cost_integrals(trace.config.dt, trace.q2, trace.q3, trace.u_applied, w2, pi_bar)


def theorem1_sweep(base: ScenarioConfig, grid) -> list[SweepPoint]:
    """Total cost for each constant paying flow ``q3`` in ``grid``.

    Each level is an open-loop run: the controller is bypassed, the queues
    follow the point-queue model with ``q3`` held fixed, and the toll is the
    price that would make the choice model produce that ``q3``.
    """
    spec = base.demand_spec
    if not isinstance(spec, ConstantDemand):
        raise AssumptionViolation("the q3 sweep needs constant demands")
    grid = [float(g) for g in grid]
    if not grid:
        raise ValueError("empty grid")
    caps = base.capacities
    top = caps.c1 - spec.q1
    for level in grid:
        if level < 0.0 or level > top + 1e-12:
            raise AssumptionViolation(f"q3 = {level} is outside [0, c1 - q1] = [0, {top}]")

    model = base.choice_model
    out = []
    for level in grid:
        trace = run(base, probe_zeta=caps.c1 - spec.q1 - level)
        q2 = trace.q2
        q3 = trace.q3
        w = trace.w
        if level > 0.0:
            p = level / spec.q2
            u = np.array([model.price_for_fraction(p, float(wi)) for wi in w]) if p < 1.0 else np.zeros_like(w)
        else:
            u = np.zeros_like(w)  # q3 * u -> 0 as q3 -> 0
        pi_bar = gp_mean_vot(model, u, w) if level > 0.0 else np.full_like(w, model.mean_vot_below(math.inf))
        cost = cost_integrals(base.dt, q2, q3, u, trace.lambda2 / caps.c2, pi_bar)
        out.append(SweepPoint(level, cost.phi2, cost.phi3))
    return out


# --------------------------------------------------------------------------- #
# Equilibrium and stability
# --------------------------------------------------------------------------- #


def equilibrium_profile(demand: DemandSample, caps: Capacities) -> float:
    """Growth rate ``w0`` of the queueing-time difference at the ideal state."""
    w0 = (demand.q1 + demand.q2 - caps.c1 - caps.c2) / caps.c2
    if w0 <= 0.0:
        raise AssumptionViolation(f"demands are not congested (w0 = {w0})")
    return w0


def equilibrium_price_slope(model: LaneChoiceModel, demand: DemandSample, caps: Capacities) -> float:
    """``A(0) * w0``: the price growth rate once the ideal state is reached."""
    a0, _ = model.affine_terms(0.0, demand, caps)
    return a0 * equilibrium_profile(demand, caps)


def switching_modes(c: float, gains: Gains) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of the queue-free and queue-present modes of the linearised loop."""
    mode1 = np.array([-gains.k2 / c])
    # State (lambda1, zeta): lambda1' = -zeta, zeta' = (k1*lambda1 - k2*zeta)/c
    m = np.array([[0.0, -1.0], [gains.k1 / c, -gains.k2 / c]])
    return mode1, np.linalg.eigvals(m)


def linearized_stability(model: LaneChoiceModel, demand: DemandSample, caps: Capacities, gains: Gains,
                         t_eval: float, dt: float | None = None) -> StabilityReport:
    if t_eval <= 0.0:
        raise ValueError("t_eval must be positive")
    w0 = equilibrium_profile(demand, caps)
    da, db = affine_derivatives_at_zero(model, demand, caps)
    return stability_from_derivatives(da, db, w0, gains, t_eval, dt)


def stability_from_derivatives(da: float, db: float, w0: float, gains: Gains, t_eval: float,
                               dt: float | None = None) -> StabilityReport:
    c = da + db / (w0 * t_eval)
    if not c > 0.0:
        raise AssumptionViolation(f"A'(0) + B'(0)/(w0 t) = {c} is not positive")
    mode1, mode2 = switching_modes(c, gains)
    eig = np.concatenate([mode1, mode2])
    stable = bool(np.all(eig.real < 0.0))
    stiff = dt is not None and bool(np.max(np.abs(eig)) > 2.0 / dt)
    return StabilityReport(c, t_eval, mode1, mode2, stable, stiff)


def stability_from_trace(trace: SimTrace, eps: float = 0.05) -> StabilityReport:
    """Linear stability evaluated at the trace's convergence time, or mid-horizon."""
    cfg = trace.config
    if not isinstance(cfg.demand_spec, ConstantDemand):
        raise AssumptionViolation("linearisation needs constant demands")
    t_conv = detect_convergence(trace, eps, eps)
    t_eval = t_conv if t_conv else cfg.horizon / 2
    demand = DemandSample(cfg.demand_spec.q1, cfg.demand_spec.q2)
    return linearized_stability(cfg.choice_model, demand, cfg.capacities, cfg.gains, t_eval, cfg.dt)


# --------------------------------------------------------------------------- #
# Trace fits
# --------------------------------------------------------------------------- #


def price_slope(trace: SimTrace, window: float | None = None) -> float:
    """Least-squares slope of the applied price over the last ``window`` minutes
    (default: last quarter of the horizon)."""
    t = trace.t
    window = 0.25 * (t[-1] + trace.config.dt) if window is None else window
    sel = t >= t[-1] + trace.config.dt - window
    return float(np.polyfit(t[sel], trace.u_applied[sel], 1)[0])


def decay_rate(t, values, t_start: float, t_end: float) -> float:
    """Exponential rate ``r`` fitted to ``|values| ~ exp(r t)`` on ``[t_start, t_end]``."""
    t = np.asarray(t)
    v = np.abs(np.asarray(values))
    sel = (t >= t_start) & (t <= t_end) & (v > 0)
    if sel.sum() < 2:
        raise ValueError("not enough nonzero samples in the window")
    return float(np.polyfit(t[sel], np.log(v[sel]), 1)[0])
