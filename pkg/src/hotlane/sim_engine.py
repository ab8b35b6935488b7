"""Closed-loop driver: demand -> w -> price -> lane choice -> queues -> controller.

Two interchangeable backends produce the same trace:

* ``"kernel"`` runs :func:`hotlane.kernels.closed_loop` (numba-compiled unless
  disabled) and requires a built-in choice model.
* ``"reference"`` steps the immutable domain objects through the functions of
  the individual modules. It accepts any :class:`LaneChoiceModel`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .domain import (
    ConstantDemand,
    DemandSample,
    DemandSpec,
    PoissonDemand,
    ScenarioConfig,
    StepRecord,
    require_valid,
)
from .lane_choice import flow_and_residual
from .pricing_controller import compute_price, controller_step
from .queue_dynamics import queue_step, queueing_time_diff


class NumericAbort(RuntimeError):
    """A state variable became NaN or infinite."""

    def __init__(self, step: int, t: float):
        self.step = step
        self.t = t
        super().__init__(f"non-finite state at step {step} (t = {t:.6g} min)")


# --------------------------------------------------------------------------- #
# Demand
# --------------------------------------------------------------------------- #


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; the seed is echoed in every trace."""
    return np.random.Generator(np.random.PCG64(seed))


def sample_demand(spec: DemandSpec, t: float, rng: np.random.Generator) -> DemandSample:
    """Demand rates for the block starting at ``t``.

    Poisson specs draw fresh counts on every call; callers hold the result
    until the next block boundary (see :func:`demand_series`).
    """
    if isinstance(spec, ConstantDemand):
        return DemandSample(float(spec.q1), float(spec.q2))
    tau = spec.resample_every
    n1 = rng.poisson(spec.mean1 * tau)
    n2 = rng.poisson(spec.mean2 * tau)
    return DemandSample(n1 / tau, n2 / tau)


def demand_series(spec: DemandSpec, n_steps: int, dt: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-step arrays ``(q1, q2)`` for a whole run."""
    if isinstance(spec, ConstantDemand):
        return np.full(n_steps, float(spec.q1)), np.full(n_steps, float(spec.q2))
    if not isinstance(spec, PoissonDemand):
        raise TypeError(f"unknown demand spec {spec!r}")
    q1 = np.empty(n_steps)
    q2 = np.empty(n_steps)
    # Block index of step k is floor(k*dt/tau); the epsilon guards against k*dt landing just below a boundary.
    blocks = np.floor(np.arange(n_steps) * dt / spec.resample_every + 1e-9).astype(np.int64)
    current = -1
    sample = None
    for k in range(n_steps):
        if blocks[k] != current:
            current = blocks[k]
            sample = sample_demand(spec, k * dt, rng)
        q1[k] = sample.q1
        q2[k] = sample.q2
    return q1, q2


# --------------------------------------------------------------------------- #
# Trace
# --------------------------------------------------------------------------- #


@dataclass
class SimTrace:
    """Column-oriented trace, one entry per step."""

    data: np.ndarray  # (n_steps, len(kernels.COLUMNS))
    flags: np.ndarray  # (n_steps, 2) bool: clamped, w_degenerate
    config: ScenarioConfig
    seed: int
    backend: str = "kernel"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.data.shape[0]

    def __getattr__(self, name):
        # Column access: trace.zeta, trace.lambda1, ...
        if name in kernels.COLUMNS:
            return self.data[:, kernels.COLUMNS.index(name)]
        raise AttributeError(name)

    @property
    def clamped(self) -> np.ndarray:
        return self.flags[:, kernels.FLAG_CLAMPED]

    @property
    def w_degenerate(self) -> np.ndarray:
        return self.flags[:, kernels.FLAG_DEGENERATE]

    def record(self, k: int) -> StepRecord:
        row = self.data[k]
        return StepRecord(*(float(v) for v in row), clamped=bool(self.flags[k, 0]),
                          w_degenerate=bool(self.flags[k, 1]))

    @property
    def records(self) -> list[StepRecord]:
        return [self.record(k) for k in range(len(self))]


# --------------------------------------------------------------------------- #
# Runners
# --------------------------------------------------------------------------- #


def _run_kernel(cfg, q1, q2, probe_zeta):
    spec = cfg.choice_model.kernel_spec()
    if spec is None:
        raise TypeError(f"{type(cfg.choice_model).__name__} has no compiled form; use backend='reference'")
    code, params, zt, at, bt = spec
    params = np.array(tuple(params) + (0.0,) * (2 - len(params)), dtype=np.float64)
    zt = kernels.empty_table() if zt is None else np.ascontiguousarray(zt, dtype=np.float64)
    at = kernels.empty_table() if at is None else np.ascontiguousarray(at, dtype=np.float64)
    bt = kernels.empty_table() if bt is None else np.ascontiguousarray(bt, dtype=np.float64)
    n = q1.shape[0]
    out = np.zeros((n, len(kernels.COLUMNS)))
    flags = np.zeros((n, 2), dtype=np.bool_)
    caps, lanes, ctrl = cfg.capacities, cfg.initial_lanes, cfg.initial_controller
    bad = kernels.closed_loop(
        code, params, zt, at, bt, q1, q2, float(caps.c1), float(caps.c2), float(cfg.dt),
        np.array(cfg.gains.as_tuple(), dtype=np.float64),
        float(lanes.lambda1), float(lanes.lambda2), float(ctrl.a), float(ctrl.b),
        bool(cfg.price_floor_enabled), probe_zeta is not None,
        0.0 if probe_zeta is None else float(probe_zeta), out, flags,
    )
    return out, flags, int(bad)


def _run_reference(cfg, q1, q2, probe_zeta):
    n = q1.shape[0]
    out = np.zeros((n, len(kernels.COLUMNS)))
    flags = np.zeros((n, 2), dtype=np.bool_)
    caps, model, dt = cfg.capacities, cfg.choice_model, cfg.dt
    lanes, ctrl = cfg.initial_lanes, cfg.initial_controller
    for k in range(n):
        demand = DemandSample(float(q1[k]), float(q2[k]))
        w = queueing_time_diff(lanes, caps)
        u_raw, u = compute_price(ctrl, w, cfg.price_floor_enabled)
        if probe_zeta is None:
            q3, zeta = flow_and_residual(model, u, w, demand, caps)
            p = q3 / demand.q2 if demand.q2 > 0 else model.choice_fraction(u, w, demand, caps)
            degenerate = model.is_degenerate(u, w)
        else:
            zeta = float(probe_zeta)
            q3 = caps.c1 - demand.q1 - zeta
            p = q3 / demand.q2 if demand.q2 > 0 else 0.0
            degenerate = False
        out[k] = (k * dt, demand.q1, demand.q2, q3, w, u_raw, u, p, zeta,
                  lanes.lambda1, lanes.lambda2, ctrl.a, ctrl.b)
        flags[k] = (u != u_raw, degenerate)
        if not all(math.isfinite(v) for v in (u_raw, zeta, p)):
            return out, flags, k
        lanes_next = queue_step(lanes, demand, zeta, caps, dt)
        ctrl = controller_step(ctrl, lanes.lambda1, zeta, cfg.gains, dt)
        lanes = lanes_next
        if not all(math.isfinite(v) for v in (ctrl.a, ctrl.b, lanes.lambda1, lanes.lambda2)):
            return out, flags, k
    return out, flags, -1


def run(cfg: ScenarioConfig, backend: str = "auto", seed: int | None = None,
        probe_zeta: float | None = None) -> SimTrace:
    """Simulate ``cfg`` and return the full trace.

    ``seed`` overrides ``cfg.rng_seed``. ``probe_zeta`` bypasses the lane
    choice and holds the residual capacity at a fixed value (open-loop
    probe); the controller still integrates but its price has no effect.

    Raises :class:`~hotlane.domain.ScenarioError` for invalid configs and
    :class:`NumericAbort` if the state stops being finite.
    """
    require_valid(cfg)
    if backend == "auto":
        backend = "kernel" if cfg.choice_model.kernel_spec() is not None else "reference"
    if backend not in ("kernel", "reference"):
        raise ValueError(f"unknown backend {backend!r}")
    seed = cfg.rng_seed if seed is None else int(seed)
    n = cfg.n_steps
    q1, q2 = demand_series(cfg.demand_spec, n, cfg.dt, make_rng(seed))
    runner = _run_kernel if backend == "kernel" else _run_reference
    out, flags, bad = runner(cfg, q1, q2, probe_zeta)
    if bad >= 0:
        raise NumericAbort(bad, bad * cfg.dt)
    return SimTrace(out, flags, cfg, seed, backend)


def detect_convergence(trace: SimTrace, eps_lambda: float, eps_zeta: float) -> float | None:
    """Earliest time after which ``lambda1 <= eps_lambda`` and ``|zeta| <= eps_zeta`` hold to the end."""
    if eps_lambda <= 0 or eps_zeta <= 0:
        raise ValueError("convergence tolerances must be positive")
    bad = (trace.lambda1 > eps_lambda) | (np.abs(trace.zeta) > eps_zeta)
    if not bad.any():
        return float(trace.t[0])
    last = int(np.flatnonzero(bad)[-1])
    if last == len(trace) - 1:
        return None
    return float(trace.t[last + 1])


def queue_clear_time(trace: SimTrace, eps_lambda: float) -> float | None:
    """Earliest time after which the HOT queue stays at or below ``eps_lambda``."""
    bad = trace.lambda1 > eps_lambda
    if not bad.any():
        return float(trace.t[0])
    last = int(np.flatnonzero(bad)[-1])
    if last == len(trace) - 1:
        return None
    return float(trace.t[last + 1])
