"""Lane-choice models ``p = G(u, w)`` and their inverses.

``p`` is the share of SOVs that pay to use the HOT lanes, ``u`` the price and
``w`` the GP-minus-HOT queueing time. Every built-in model can also be written
in the affine price form ``u = A(zeta) * w + B(zeta)`` where ``zeta`` is the
HOT residual capacity ``c1 - q1 - p * q2``.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .domain import Capacities, DemandSample
from .kernels import GENERAL_AFFINE, LOGIT, UE_BURR, UE_EXPONENTIAL

FD_STEP = 1e-4  # veh/min, central-difference step for derivative fallbacks


class PriceOutOfRange(ValueError):
    """The requested residual capacity implies a share of 0 or 1 (infinite price)."""


# --------------------------------------------------------------------------- #
# VOT distributions
# --------------------------------------------------------------------------- #


class VotDistribution(ABC):
    """Distribution of values of time ($/min) on ``[0, inf)``."""

    @abstractmethod
    def cdf(self, x: float) -> float: ...

    @abstractmethod
    def quantile(self, p: float) -> float: ...

    @abstractmethod
    def pdf(self, x: float) -> float: ...

    def sf(self, x: float) -> float:
        return 1.0 - self.cdf(x)

    def isf(self, p: float) -> float:
        """Value exceeded with probability ``p``, i.e. ``quantile(1 - p)``."""
        return self.quantile(1.0 - p)

    def conditional_mean_below(self, x: float) -> float:
        """``E[pi | pi <= x]``; NaN when ``x`` is at or below the support."""
        mass = self.cdf(x)
        if mass <= 0.0:
            return math.nan
        num, _ = integrate.quad(lambda v: v * self.pdf(v), 0.0, x, limit=200)
        return num / mass

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.array([self.quantile(v) for v in rng.random(n)])

    def validate(self) -> list[str]:
        return []

    def kernel_params(self):
        """``(model_code, params)`` for the compiled loop, or None."""
        return None


@dataclass(frozen=True)
class ExponentialVot(VotDistribution):
    """``F(x) = 1 - exp(-rate * x)``; the mean VOT is ``1 / rate``."""

    rate: float

    def cdf(self, x):
        return -math.expm1(-self.rate * x) if x > 0 else 0.0

    def sf(self, x):
        return math.exp(-self.rate * x) if x > 0 else 1.0

    def pdf(self, x):
        return self.rate * math.exp(-self.rate * x) if x >= 0 else 0.0

    def quantile(self, p):
        if p >= 1.0:
            return math.inf
        return -math.log1p(-p) / self.rate

    def isf(self, p):
        if p <= 0.0:
            return math.inf
        return -math.log(p) / self.rate

    def conditional_mean_below(self, x):
        if x <= 0.0:
            return math.nan
        if math.isinf(x):
            return 1.0 / self.rate
        mx = self.rate * x
        return 1.0 / self.rate - x * math.exp(-mx) / -math.expm1(-mx)

    def sample(self, rng, n):
        return rng.exponential(1.0 / self.rate, n)

    def validate(self):
        if not (isinstance(self.rate, (int, float)) and math.isfinite(self.rate) and self.rate > 0):
            return [f"exponential rate must be positive, got {self.rate!r}"]
        return []

    def kernel_params(self):
        return UE_EXPONENTIAL, (float(self.rate),)


@dataclass(frozen=True)
class BurrVot(VotDistribution):
    """Log-logistic VOTs, ``F(x) = r / (1 + r)`` with ``r = (x / pi_star) ** gamma``.

    ``pi_star`` is the median VOT and ``gamma`` the shape.
    """

    pi_star: float
    gamma: float

    def _ratio(self, x):
        return (x / self.pi_star) ** self.gamma

    def cdf(self, x):
        if x <= 0:
            return 0.0
        if math.isinf(x):
            return 1.0
        r = self._ratio(x)
        return r / (1.0 + r)

    def sf(self, x):
        if x <= 0:
            return 1.0
        if math.isinf(x):
            return 0.0
        return 1.0 / (1.0 + self._ratio(x))

    def pdf(self, x):
        if x < 0:
            return 0.0
        if x == 0:
            # Right limit at the origin.
            if self.gamma < 1:
                return math.inf
            return 1.0 / self.pi_star if self.gamma == 1 else 0.0
        r = self._ratio(x)
        return self.gamma * r / (x * (1.0 + r) ** 2)

    def quantile(self, p):
        if p <= 0.0:
            return 0.0
        if p >= 1.0:
            return math.inf
        return self.pi_star * (p / (1.0 - p)) ** (1.0 / self.gamma)

    def isf(self, p):
        if p >= 1.0:
            return 0.0
        if p <= 0.0:
            return math.inf
        return self.pi_star * ((1.0 - p) / p) ** (1.0 / self.gamma)

    def validate(self):
        errs = []
        if not (isinstance(self.pi_star, (int, float)) and self.pi_star > 0):
            errs.append(f"burr pi_star must be positive, got {self.pi_star!r}")
        if not (isinstance(self.gamma, (int, float)) and self.gamma > 0):
            errs.append(f"burr gamma must be positive, got {self.gamma!r}")
        return errs

    def kernel_params(self):
        return UE_BURR, (float(self.pi_star), float(self.gamma))


# --------------------------------------------------------------------------- #
# Lane-choice models
# --------------------------------------------------------------------------- #


def implied_fraction(zeta: float, demand: DemandSample, caps: Capacities) -> float:
    """Paying share that produces residual capacity ``zeta``."""
    return (caps.c1 - demand.q1 - zeta) / demand.q2


def _interior_fraction(zeta, demand, caps) -> float:
    p = implied_fraction(zeta, demand, caps)
    if not (0.0 < p < 1.0):
        raise PriceOutOfRange(f"residual capacity {zeta!r} implies paying share {p!r} outside (0, 1)")
    return p


class LaneChoiceModel(ABC):
    """Common interface of the lane-choice models."""

    @abstractmethod
    def choice_fraction(self, u: float, w: float, demand: DemandSample | None = None,
                        caps: Capacities | None = None) -> float: ...

    @abstractmethod
    def price_for_fraction(self, p: float, w: float) -> float:
        """Inverse of ``choice_fraction`` in ``u`` for an interior share ``p``."""

    @abstractmethod
    def affine_terms(self, zeta: float, demand: DemandSample, caps: Capacities) -> tuple[float, float]: ...

    def is_degenerate(self, u: float, w: float) -> bool:
        """True when ``w`` falls outside the regime where the model is defined."""
        return False

    def affine_derivatives(self, zeta: float, demand: DemandSample, caps: Capacities) -> tuple[float, float]:
        return finite_difference_derivatives(self, zeta, demand, caps)

    def mean_vot_below(self, x: float) -> float:
        """Mean VOT of SOVs who stay on the GP lanes at switching ratio ``x = u/w``."""
        raise TypeError(f"{type(self).__name__} defines no VOT for the GP-staying SOVs")

    def validate(self) -> list[str]:
        return []

    def kernel_spec(self):
        """``(code, params, zeta_table, a_table, b_table)`` or None if the
        model can only be evaluated through the Python reference loop."""
        return None


@dataclass(frozen=True)
class LogitModel(LaneChoiceModel):
    """Binary logit with one common VOT ``pi_star`` and scale ``alpha_star``."""

    pi_star: float
    alpha_star: float = 1.0

    def choice_fraction(self, u, w, demand=None, caps=None):
        z = self.alpha_star * (u - self.pi_star * w)
        if z >= 0:
            e = math.exp(-z)
            return e / (1.0 + e)
        return 1.0 / (1.0 + math.exp(z))

    def price_for_fraction(self, p, w):
        return self.pi_star * w + math.log((1.0 - p) / p) / self.alpha_star

    def affine_terms(self, zeta, demand, caps):
        p = _interior_fraction(zeta, demand, caps)
        return self.pi_star, math.log((1.0 - p) / p) / self.alpha_star

    def affine_derivatives(self, zeta, demand, caps):
        _interior_fraction(zeta, demand, caps)
        slope = 1.0 / (demand.q1 + demand.q2 - caps.c1 + zeta) + 1.0 / (caps.c1 - demand.q1 - zeta)
        return 0.0, slope / self.alpha_star

    def mean_vot_below(self, x):
        return self.pi_star

    def validate(self):
        errs = []
        for name in ("pi_star", "alpha_star"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                errs.append(f"logit {name} must be positive, got {v!r}")
        return errs

    def kernel_spec(self):
        return LOGIT, (float(self.pi_star), float(self.alpha_star)), None, None, None


@dataclass(frozen=True)
class UeModel(LaneChoiceModel):
    """Vehicle-based user equilibrium: an SOV pays iff its VOT is at least ``u / w``.

    Outside ``w > 0`` nobody gains time by paying, so the share is 0 (a free
    HOT lane with ``w == 0`` is a tie and is broken towards GP).
    """

    dist: VotDistribution

    def is_degenerate(self, u, w):
        return w <= 0.0

    def choice_fraction(self, u, w, demand=None, caps=None):
        if w <= 0.0:
            return 0.0
        return self.dist.sf(u / w)

    def price_for_fraction(self, p, w):
        if w <= 0.0:
            raise PriceOutOfRange("user-equilibrium price needs w > 0")
        return self.dist.isf(p) * w

    def affine_terms(self, zeta, demand, caps):
        return self.dist.isf(_interior_fraction(zeta, demand, caps)), 0.0

    def affine_derivatives(self, zeta, demand, caps):
        p = _interior_fraction(zeta, demand, caps)
        density = self.dist.pdf(self.dist.isf(p))
        if density > 0:
            return 1.0 / (demand.q2 * density), 0.0
        return super().affine_derivatives(zeta, demand, caps)

    def mean_vot_below(self, x):
        return self.dist.conditional_mean_below(x)

    def validate(self):
        if not isinstance(self.dist, VotDistribution):
            return [f"unsupported VOT distribution {self.dist!r}"]
        return self.dist.validate()

    def kernel_spec(self):
        spec = self.dist.kernel_params()
        if spec is None:
            return None
        code, params = spec
        return code, params, None, None, None


@dataclass(frozen=True)
class GeneralAffineModel(LaneChoiceModel):
    """Price law ``u = A(zeta) * w + B(zeta)`` given as piecewise-linear tables.

    Tables are clamped outside their range. The share for a given price is
    found by solving for ``zeta`` on the feasible interval, so demand and
    capacities must be supplied to ``choice_fraction``. A negative ``w`` is
    evaluated as 0.
    """

    zeta: tuple[float, ...]
    A: tuple[float, ...]
    B: tuple[float, ...]
    _arrays: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arrays = tuple(np.asarray(v, dtype=float) for v in (self.zeta, self.A, self.B))
        object.__setattr__(self, "_arrays", arrays)

    def _table(self, zeta):
        zt, at, bt = self._arrays
        return float(np.interp(zeta, zt, at)), float(np.interp(zeta, zt, bt))

    def is_degenerate(self, u, w):
        return w < 0.0

    def choice_fraction(self, u, w, demand=None, caps=None):
        if demand is None or caps is None:
            raise TypeError("GeneralAffineModel.choice_fraction needs demand and caps")
        w = max(w, 0.0)
        lo = caps.c1 - demand.q1 - demand.q2  # everyone pays
        hi = caps.c1 - demand.q1  # nobody pays

        def excess(z):
            a, b = self._table(z)
            return a * w + b - u

        f_lo, f_hi = excess(lo), excess(hi)
        if f_lo >= 0.0:
            zeta = lo
        elif f_hi <= 0.0:
            zeta = hi
        else:
            zeta = optimize.brentq(excess, lo, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)
        return min(1.0, max(0.0, implied_fraction(zeta, demand, caps)))

    def price_for_fraction(self, p, w):
        raise TypeError("GeneralAffineModel prices are defined through zeta; use inverse_price")

    def affine_terms(self, zeta, demand, caps):
        return self._table(zeta)

    def validate(self):
        zt, at, bt = self._arrays
        errs = []
        if not (zt.ndim == at.ndim == bt.ndim == 1 and len(zt) == len(at) == len(bt) >= 2):
            return ["affine tables need equal lengths of at least 2"]
        if not (np.all(np.isfinite(zt)) and np.all(np.isfinite(at)) and np.all(np.isfinite(bt))):
            errs.append("affine tables must be finite")
        if np.any(np.diff(zt) <= 0):
            errs.append("affine zeta grid must be strictly increasing")
        if np.any(np.diff(at) < 0):
            errs.append("A(zeta) table must be nondecreasing")
        if np.any(np.diff(bt) < 0):
            errs.append("B(zeta) table must be nondecreasing")
        if not errs and zt[0] <= 0.0 <= zt[-1]:
            k = min(max(int(np.searchsorted(zt, 0.0, side="right")) - 1, 0), len(zt) - 2)
            da = (at[k + 1] - at[k]) / (zt[k + 1] - zt[k])
            db = (bt[k + 1] - bt[k]) / (zt[k + 1] - zt[k])
            if da + db <= 0:
                errs.append("A'(0) + B'(0) must be positive")
        return errs

    def kernel_spec(self):
        zt, at, bt = self._arrays
        return GENERAL_AFFINE, (), zt, at, bt


# --------------------------------------------------------------------------- #
# Operations
# --------------------------------------------------------------------------- #


def choice_fraction(model: LaneChoiceModel, u: float, w: float, demand: DemandSample | None = None,
                    caps: Capacities | None = None) -> float:
    return model.choice_fraction(u, w, demand, caps)


def flow_and_residual(model: LaneChoiceModel, u: float, w: float, demand: DemandSample,
                      caps: Capacities) -> tuple[float, float]:
    """Return ``(q3, zeta)``: paying SOV flow and HOT residual capacity."""
    q3 = model.choice_fraction(u, w, demand, caps) * demand.q2
    return q3, caps.c1 - demand.q1 - q3


def inverse_price(model: LaneChoiceModel, zeta_target: float, w: float, demand: DemandSample,
                  caps: Capacities) -> float:
    """Price that makes the lane choice produce ``zeta_target``."""
    p = _interior_fraction(zeta_target, demand, caps)
    if isinstance(model, GeneralAffineModel):
        a, b = model.affine_terms(zeta_target, demand, caps)
        return a * max(w, 0.0) + b
    return model.price_for_fraction(p, w)


def affine_decomposition(model: LaneChoiceModel, zeta: float, demand: DemandSample,
                         caps: Capacities) -> tuple[float, float]:
    return model.affine_terms(zeta, demand, caps)


def affine_derivatives_at_zero(model: LaneChoiceModel, demand: DemandSample,
                               caps: Capacities) -> tuple[float, float]:
    """``(A'(0), B'(0))``, analytic where the model provides it."""
    return model.affine_derivatives(0.0, demand, caps)


def finite_difference_derivatives(model: LaneChoiceModel, zeta: float, demand: DemandSample,
                                  caps: Capacities, h: float = FD_STEP) -> tuple[float, float]:
    a_hi, b_hi = model.affine_terms(zeta + h, demand, caps)
    a_lo, b_lo = model.affine_terms(zeta - h, demand, caps)
    return (a_hi - a_lo) / (2 * h), (b_hi - b_lo) / (2 * h)
