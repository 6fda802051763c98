"""Compiled scalar kernels for penalties, thresholding and coordinate sweeps.

Every penalty is addressed by an integer kind code plus the scalars
``(lam, tau, h, shape)``; unused scalars are ignored by a given kind.
All kernels release the GIL so independent fits can share a thread pool.
"""
import math

import numpy as np
from numba import njit

LASSO = 0
MCP = 1
SCAD = 2
TWIN_A = 3
TWIN_B = 4

# TWIN-a constants: knee m1 * tau, tail level d1, tail derivative c * d1 / tau
TWIN_A_M = 4.0 / 3.0
TWIN_A_D = 32.0 / 27.0
TWIN_A_TAIL = 16.0 / 27.0

_BISECT_STEPS = 200


@njit(cache=True, nogil=True)
def twin_b_breaks(tau, h):
    """Return ``(m2 * tau, d2)`` for TWIN-b."""
    knee = (1.0 + math.sqrt(0.5 * (1.0 - h))) * tau
    flat = (1.0 + math.sqrt(2.0 * (1.0 - h))) * tau
    return knee, flat


@njit(cache=True, nogil=True)
def penalty_value(kind, lam, tau, h, shape, t):
    if kind == LASSO:
        return lam * t
    if kind == MCP:
        if t <= shape * lam:
            return lam * t - t * t / (2.0 * shape)
        return 0.5 * shape * lam * lam
    if kind == SCAD:
        if t <= lam:
            return lam * t
        if t <= shape * lam:
            return (2.0 * shape * lam * t - t * t - lam * lam) / (2.0 * (shape - 1.0))
        return 0.5 * lam * lam * (shape + 1.0)
    c = 0.5 * tau
    if kind == TWIN_A:
        if t <= TWIN_A_M * tau:
            s = t / tau
            return lam * c * s * (2.0 - s)
        return lam * c * TWIN_A_D * tau / t
    knee, flat = twin_b_breaks(tau, h)
    if t <= knee:
        s = t / tau
        return lam * c * s * (2.0 - s)
    if t < flat:
        v = (t - flat) / tau
        return lam * c * (v * v + h)
    return lam * c * h


@njit(cache=True, nogil=True)
def penalty_derivative(kind, lam, tau, h, shape, t):
    """Right derivative of the penalty at ``t >= 0`` (``lam`` at the origin)."""
    if kind == LASSO:
        return lam
    if kind == MCP:
        if t < shape * lam:
            return lam - t / shape
        return 0.0
    if kind == SCAD:
        if t <= lam:
            return lam
        if t <= shape * lam:
            return (shape * lam - t) / (shape - 1.0)
        return 0.0
    if kind == TWIN_A:
        if t <= TWIN_A_M * tau:
            return lam * (1.0 - t / tau)
        return -TWIN_A_TAIL * lam * tau * tau / (t * t)
    knee, flat = twin_b_breaks(tau, h)
    if t <= knee:
        return lam * (1.0 - t / tau)
    if t < flat:
        return lam * (t - flat) / tau
    return 0.0


@njit(cache=True, nogil=True)
def objective_1d(kind, lam, tau, h, shape, z, theta):
    d = z - theta
    return 0.5 * d * d + penalty_value(kind, lam, tau, h, shape, abs(theta))


@njit(cache=True, nogil=True)
def _tail_residual(theta, z, k):
    return theta * theta * (theta - z) - k


@njit(cache=True, nogil=True)
def tail_root(z, k, lo):
    """Positive root of ``theta**3 - z * theta**2 - k`` for ``z >= 0, k > 0``.

    Returns a value ``<= lo`` when the root does not exceed ``lo``.
    """
    z3 = z * z * z / 27.0
    big = z3 + 0.5 * k + math.sqrt(k * (z3 + 0.25 * k))
    a = big ** (1.0 / 3.0)
    theta = a + (z * z / 9.0) / a + z / 3.0
    slope = theta * (3.0 * theta - 2.0 * z)
    if slope > 0.0:
        theta -= _tail_residual(theta, z, k) / slope
    if abs(_tail_residual(theta, z, k)) <= 1e-8 * max(1.0, z * z * z):
        return theta
    # bisection fallback on [lo, z + k / lo**2]
    if _tail_residual(lo, z, k) >= 0.0:
        return lo
    left = lo
    right = z + k / (lo * lo)
    for _ in range(_BISECT_STEPS):
        mid = 0.5 * (left + right)
        if _tail_residual(mid, z, k) < 0.0:
            left = mid
        else:
            right = mid
    return 0.5 * (left + right)


@njit(cache=True, nogil=True)
def _pick(kind, lam, tau, h, z, theta, best_theta, best_f):
    f = objective_1d(kind, lam, tau, h, 0.0, z, theta)
    # ties go to the larger magnitude
    if f < best_f or (f == best_f and theta > best_theta):
        return theta, f
    return best_theta, best_f


@njit(cache=True, nogil=True)
def twin_threshold_positive(kind, lam, tau, h, z):
    """Global minimizer of the univariate TWIN problem for ``z > 0``."""
    best_theta = 0.0
    best_f = 0.5 * z * z
    if kind == TWIN_A:
        knee = TWIN_A_M * tau
        flat = 0.0
    else:
        knee, flat = twin_b_breaks(tau, h)
    slope = 1.0 - lam / tau
    if slope > 0.0:
        theta = (z - lam) / slope
        if theta > 0.0 and theta <= knee:
            best_theta, best_f = _pick(kind, lam, tau, h, z, theta, best_theta, best_f)
    best_theta, best_f = _pick(kind, lam, tau, h, z, knee, best_theta, best_f)
    if kind == TWIN_A:
        theta = tail_root(z, TWIN_A_TAIL * lam * tau * tau, knee)
        if theta > knee:
            best_theta, best_f = _pick(kind, lam, tau, h, z, theta, best_theta, best_f)
        return best_theta
    theta = (z + lam * flat / tau) / (1.0 + lam / tau)
    if theta > knee and theta < flat:
        best_theta, best_f = _pick(kind, lam, tau, h, z, theta, best_theta, best_f)
    best_theta, best_f = _pick(kind, lam, tau, h, z, flat, best_theta, best_f)
    if z >= flat:
        best_theta, best_f = _pick(kind, lam, tau, h, z, z, best_theta, best_f)
    return best_theta


@njit(cache=True, nogil=True)
def threshold(kind, lam, tau, h, shape, z):
    a = abs(z)
    if a == 0.0:
        return 0.0
    if kind == LASSO:
        mag = a - lam if a > lam else 0.0
    elif kind == MCP:
        if a <= lam:
            mag = 0.0
        elif a <= shape * lam:
            mag = (a - lam) / (1.0 - 1.0 / shape)
        else:
            mag = a
    elif kind == SCAD:
        if a <= 2.0 * lam:
            mag = a - lam if a > lam else 0.0
        elif a <= shape * lam:
            mag = ((shape - 1.0) * a - shape * lam) / (shape - 2.0)
        else:
            mag = a
    else:
        mag = twin_threshold_positive(kind, lam, tau, h, a)
    return math.copysign(mag, z)


@njit(cache=True, nogil=True)
def penalty_values(kind, lam, tau, h, shape, t):
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        out[i] = penalty_value(kind, lam, tau, h, shape, abs(t[i]))
    return out


@njit(cache=True, nogil=True)
def penalty_derivatives(kind, lam, tau, h, shape, t):
    out = np.empty(t.shape[0])
    for i in range(t.shape[0]):
        out[i] = penalty_derivative(kind, lam, tau, h, shape, abs(t[i]))
    return out


@njit(cache=True, nogil=True)
def thresholds(kind, lam, tau, h, shape, z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = threshold(kind, lam, tau, h, shape, z[i])
    return out


@njit(cache=True, nogil=True)
def cd_sweep(X, r, beta, order, kind, lam, tau, h, shape):
    """One coordinate-descent pass over ``order`` with exact univariate updates.

    ``X`` has unit-norm columns; ``r`` is the full residual and is kept in
    sync with ``beta``. Returns the largest absolute coefficient change.
    """
    n = X.shape[0]
    max_change = 0.0
    for idx in range(order.shape[0]):
        j = order[idx]
        old = beta[j]
        z = old
        for i in range(n):
            z += X[i, j] * r[i]
        new = threshold(kind, lam, tau, h, shape, z)
        delta = new - old
        if delta != 0.0:
            for i in range(n):
                r[i] -= delta * X[i, j]
            beta[j] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
    return max_change


@njit(cache=True, nogil=True)
def weighted_l1_sweep(X, r, beta, order, weights):
    """Coordinate pass on the weighted-l1 surrogate.

    Nonnegative weights soft-threshold; a negative weight enlarges the
    coordinate to ``sgn(z) * (|z| - w)``.
    """
    n = X.shape[0]
    max_change = 0.0
    for idx in range(order.shape[0]):
        j = order[idx]
        old = beta[j]
        z = old
        for i in range(n):
            z += X[i, j] * r[i]
        w = weights[j]
        a = abs(z)
        if w >= 0.0:
            mag = a - w if a > w else 0.0
        else:
            mag = a - w
        if z > 0.0:
            new = mag
        elif z < 0.0:
            new = -mag
        else:
            new = 0.0
        delta = new - old
        if delta != 0.0:
            for i in range(n):
                r[i] -= delta * X[i, j]
            beta[j] = new
            if abs(delta) > max_change:
                max_change = abs(delta)
    return max_change
