"""Recover lane-choice parameters from observed ``(u, w, q2, q3)``.

Estimation is purely observational: nothing here feeds back into pricing.
Degenerate samples (``w <= 0``, or no split between the lanes) return
``None`` and the caller skips them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import isotonic_regression

DEDUP_TOL = 1e-9
MONOTONE_TOL = 1e-9


class InsufficientData(ValueError):
    pass


@dataclass(frozen=True)
class VotPointEstimate:
    t: float
    pi_hat: float


@dataclass(frozen=True)
class EmpiricalCdfPoint:
    x: float  # VOT ratio u/w, $/min
    F_hat: float


def estimate_logit_vot(u: float, w: float, q2: float, q3: float, alpha: float = 1.0) -> float | None:
    """Invert the logit share for the common VOT.

    ``alpha`` is the logit scale; the log-odds term is divided by it.
    """
    if not (w > 0.0 and 0.0 < q3 < q2):
        return None
    return (u - math.log((q2 - q3) / q3) / alpha) / w


def logit_vot_series(u, w, q2, q3, alpha: float = 1.0) -> np.ndarray:
    """Vectorised :func:`estimate_logit_vot`; skipped steps are NaN."""
    u, w, q2, q3 = (np.asarray(v, dtype=float) for v in (u, w, q2, q3))
    valid = (w > 0.0) & (q3 > 0.0) & (q3 < q2)
    out = np.full(u.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        est = (u - np.log((q2 - q3) / q3) / alpha) / w
    out[valid] = est[valid]
    return out


def accumulate_cdf_point(u: float, w: float, q2: float, q3: float) -> EmpiricalCdfPoint | None:
    """One point ``(u/w, 1 - q3/q2)`` of the empirical VOT distribution."""
    if not (w > 0.0 and q2 > 0.0 and 0.0 <= q3 <= q2):
        return None
    x = u / w
    if x < 0.0:
        return None
    F_hat = 1.0 - q3 / q2
    if q3 == q2 and x > 0.0:
        # Everyone pays at a positive price: only says F(x) == 0, uninformative.
        return None
    return EmpiricalCdfPoint(x, F_hat)


class CdfAccumulator:
    """Collects empirical CDF points over a run."""

    def __init__(self):
        self._x: list[float] = []
        self._F: list[float] = []

    def add(self, u, w, q2, q3) -> EmpiricalCdfPoint | None:
        pt = accumulate_cdf_point(u, w, q2, q3)
        if pt is not None:
            self._x.append(pt.x)
            self._F.append(pt.F_hat)
        return pt

    def extend_from_trace(self, trace) -> None:
        for u, w, q2, q3 in zip(trace.u_applied, trace.w, trace.q2, trace.q3):
            self.add(float(u), float(w), float(q2), float(q3))

    def __len__(self):
        return len(self._x)

    def points(self) -> list[EmpiricalCdfPoint]:
        return [EmpiricalCdfPoint(x, F) for x, F in zip(self._x, self._F)]

    def sorted_cdf(self) -> tuple[np.ndarray, np.ndarray, bool]:
        """Deduplicated, sorted and monotone CDF plus a flag telling whether
        isotonic pooling changed anything beyond ``MONOTONE_TOL``."""
        return monotone_cdf(self.points())


def _dedup(points) -> tuple[np.ndarray, np.ndarray]:
    if not points:
        return np.zeros(0), np.zeros(0)
    xs = np.array([p.x for p in points], dtype=float)
    Fs = np.array([p.F_hat for p in points], dtype=float)
    order = np.argsort(xs, kind="stable")
    xs, Fs = xs[order], Fs[order]
    # New group whenever x moves more than DEDUP_TOL past the group's first x.
    gx, gF = [], []
    start, acc, count = xs[0], Fs[0], 1
    for x, F in zip(xs[1:], Fs[1:]):
        if x - start <= DEDUP_TOL:
            acc += F
            count += 1
        else:
            gx.append(start)
            gF.append(acc / count)
            start, acc, count = x, F, 1
    gx.append(start)
    gF.append(acc / count)
    return np.array(gx), np.array(gF)


def monotone_cdf(points) -> tuple[np.ndarray, np.ndarray, bool]:
    x, F = _dedup(points)
    if len(F) < 2:
        return x, F, False
    pooled = isotonic_regression(F, increasing=True).x
    repaired = bool(np.max(np.abs(pooled - F)) > MONOTONE_TOL)
    return x, pooled, repaired


def empirical_pdf(points) -> list[tuple[float, float]]:
    """Density by differencing the empirical CDF.

    Points are sorted, deduplicated and pooled to a nondecreasing CDF. Interior
    points get centred slopes; with only two distinct abscissae the single
    slope is reported at their midpoint. Slopes are clipped at zero.
    """
    x, F, _ = monotone_cdf(points)
    if len(x) < 2:
        raise InsufficientData("need at least two distinct VOT ratios")
    if len(x) == 2:
        return [(0.5 * (x[0] + x[1]), max(0.0, (F[1] - F[0]) / (x[1] - x[0])))]
    slopes = (F[2:] - F[:-2]) / (x[2:] - x[:-2])
    return [(float(xi), float(max(0.0, s))) for xi, s in zip(x[1:-1], slopes)]
