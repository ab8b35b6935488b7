"""Compiled inner loop of the closed-loop simulation.

Everything here works on plain floats and numpy arrays so that numba can
compile it. With ``HOTLANE_DISABLE_NUMBA=1`` the same functions run as
ordinary Python. ``sim_engine`` has a separate object-level reference loop
built from the module functions; tests compare the two.
"""
import math

import numpy as np

from ._accel import njit

LOGIT, UE_EXPONENTIAL, UE_BURR, GENERAL_AFFINE = 0, 1, 2, 3

COLUMNS = ("t", "q1", "q2", "q3", "w", "u_raw", "u_applied", "p", "zeta",
           "lambda1", "lambda2", "a", "b")
(T, Q1, Q2, Q3, W, U_RAW, U_APPLIED, P, ZETA, LAMBDA1, LAMBDA2, A, B) = range(len(COLUMNS))
FLAG_CLAMPED, FLAG_DEGENERATE = 0, 1


@njit(cache=True, nogil=True)
def _logistic(z):
    # Stable for large |z|: exponentiate the non-positive side only.
    if z >= 0.0:
        e = math.exp(-z)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(z))


@njit(cache=True, nogil=True)
def _affine_share(zt, at, bt, u, w, q1, q2, c1):
    if w < 0.0:
        w = 0.0
    lo = c1 - q1 - q2
    hi = c1 - q1
    f_lo = np.interp(lo, zt, at) * w + np.interp(lo, zt, bt) - u
    f_hi = np.interp(hi, zt, at) * w + np.interp(hi, zt, bt) - u
    if f_lo >= 0.0:
        z = lo
    elif f_hi <= 0.0:
        z = hi
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid == lo or mid == hi:
                break
            if np.interp(mid, zt, at) * w + np.interp(mid, zt, bt) - u < 0.0:
                lo = mid
            else:
                hi = mid
        z = 0.5 * (lo + hi)
    p = (c1 - q1 - z) / q2
    return min(1.0, max(0.0, p))


@njit(cache=True, nogil=True)
def share(code, params, zt, at, bt, u, w, q1, q2, c1):
    """Paying share and a flag for out-of-regime ``w``."""
    if code == LOGIT:
        return _logistic(params[1] * (u - params[0] * w)), False
    if code == UE_EXPONENTIAL or code == UE_BURR:
        if w <= 0.0:
            return 0.0, True
        x = u / w
        if x <= 0.0:
            return 1.0, False
        if code == UE_EXPONENTIAL:
            return math.exp(-params[0] * x), False
        return 1.0 / (1.0 + (x / params[0]) ** params[1]), False
    return _affine_share(zt, at, bt, u, w, q1, q2, c1), w < 0.0


@njit(cache=True, nogil=True)
def closed_loop(code, params, zt, at, bt, q1s, q2s, c1, c2, dt, gains,
                lambda1, lambda2, a, b, floor, probe, probe_zeta, out, flags):
    """Run ``len(q1s)`` steps, writing one row of ``out`` per step.

    Per step: queueing-time difference, price, lane choice (or the probe
    value of ``zeta``), then queue and controller updates from the same
    step's measurements. Returns the index of the first step that produced a
    non-finite value, or -1.
    """
    k1, k2, k3, k4 = gains[0], gains[1], gains[2], gains[3]
    n = q1s.shape[0]
    for k in range(n):
        q1 = q1s[k]
        q2 = q2s[k]
        w = lambda2 / c2 - lambda1 / c1
        u_raw = a * w + b
        u = u_raw
        clamped = False
        if floor and u_raw < 0.0:
            u = 0.0
            clamped = True
        degenerate = False
        if probe:
            zeta = probe_zeta
            q3 = c1 - q1 - zeta
            p = q3 / q2 if q2 > 0.0 else 0.0
        else:
            p, degenerate = share(code, params, zt, at, bt, u, w, q1, q2, c1)
            q3 = p * q2
            zeta = c1 - q1 - q3

        row = out[k]
        row[0] = k * dt
        row[1] = q1
        row[2] = q2
        row[3] = q3
        row[4] = w
        row[5] = u_raw
        row[6] = u
        row[7] = p
        row[8] = zeta
        row[9] = lambda1
        row[10] = lambda2
        row[11] = a
        row[12] = b
        flags[k, 0] = clamped
        flags[k, 1] = degenerate

        if not (math.isfinite(u_raw) and math.isfinite(zeta) and math.isfinite(p)):
            return k
        new_lambda1 = max(0.0, lambda1 - zeta * dt)
        new_lambda2 = max(0.0, lambda2 + (q1 + q2 - c1 - c2 + zeta) * dt)
        a = a + (k1 * lambda1 - k2 * zeta) * dt
        b = b + (k3 * lambda1 - k4 * zeta) * dt
        lambda1 = new_lambda1
        lambda2 = new_lambda2
        if not (math.isfinite(a) and math.isfinite(b) and math.isfinite(lambda1) and math.isfinite(lambda2)):
            return k
    return -1


def empty_table():
    return np.zeros(0, dtype=np.float64)
