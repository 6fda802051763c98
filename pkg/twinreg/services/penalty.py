"""Penalty values, derivatives and exact univariate thresholding operators."""
import logging
import math
from typing import Optional

import numpy as np

from twinreg.config import get_settings
from twinreg.errors import InputError
from twinreg.models.penalty_models import (
    ComparatorParams,
    GammaRegion,
    PenaltySpec,
    TwinAParams,
    TwinBParams,
)
from twinreg.utils import kernels

logger = logging.getLogger(__name__)

_ZERO_THRESHOLD_STEPS = 200


def twin_a(lam: float, tau: float) -> TwinAParams:
    return TwinAParams(lam=lam, tau=tau)


def twin_b(lam: float, tau: float, h: Optional[float] = None) -> TwinBParams:
    if h is None:
        h = get_settings().DEFAULT_H
    return TwinBParams(lam=lam, tau=tau, h=h)


def lasso(lam: float) -> ComparatorParams:
    return ComparatorParams(kind="lasso", lam=lam)


def mcp(lam: float, gamma: Optional[float] = None) -> ComparatorParams:
    return ComparatorParams(kind="mcp", lam=lam, shape=gamma)


def scad(lam: float, a: Optional[float] = None) -> ComparatorParams:
    return ComparatorParams(kind="scad", lam=lam, shape=a)


def value(spec: PenaltySpec, t: float) -> float:
    """Penalty value P(t) for ``t >= 0``.

    Raises:
        InputError: If ``t`` is negative or not finite
    """
    if not t >= 0 or not math.isfinite(t):
        raise InputError(f"penalty value needs a finite t >= 0, got {t}")
    return float(kernels.penalty_value(*spec.kernel_args(), float(t)))


def derivative(spec: PenaltySpec, t: float) -> float:
    """Exact derivative P'(t) for ``t > 0``.

    Raises:
        InputError: If ``t`` is not strictly positive
    """
    if not t > 0 or not math.isfinite(t):
        raise InputError(f"penalty derivative needs a finite t > 0, got {t}")
    return float(kernels.penalty_derivative(*spec.kernel_args(), float(t)))


def derivative_at_zero_plus(spec: PenaltySpec) -> float:
    """Right limit of the derivative at the origin, which is lambda for every family."""
    return spec.lam


def values(spec: PenaltySpec, t: np.ndarray) -> np.ndarray:
    """Vectorized P(|t|)."""
    return kernels.penalty_values(*spec.kernel_args(), np.ascontiguousarray(t, dtype=np.float64))


def derivatives(spec: PenaltySpec, t: np.ndarray) -> np.ndarray:
    """Vectorized P'(|t|) with lambda at zero."""
    return kernels.penalty_derivatives(*spec.kernel_args(), np.ascontiguousarray(t, dtype=np.float64))


def threshold(spec: PenaltySpec, z: float) -> float:
    """Global minimizer of ``0.5 * (z - theta)**2 + P(|theta|)``.

    Odd in ``z``; ties between equally good candidates go to the larger
    magnitude, which keeps the map nondecreasing.
    """
    return float(kernels.threshold(*spec.kernel_args(), float(z)))


def thresholds(spec: PenaltySpec, z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`threshold`."""
    return kernels.thresholds(*spec.kernel_args(), np.ascontiguousarray(z, dtype=np.float64))


def soft_threshold(z: float, lam: float) -> float:
    return math.copysign(max(abs(z) - lam, 0.0), z)


def objective_1d(spec: PenaltySpec, z: float, theta: float) -> float:
    """The univariate objective minimized by :func:`threshold`."""
    return float(kernels.objective_1d(*spec.kernel_args(), float(z), float(theta)))


def gamma_region(spec: PenaltySpec, eps_derivative: Optional[float] = None) -> GammaRegion:
    """Onset of the zero-derivative region.

    TWIN-b becomes exactly flat at d2. TWIN-a only flattens in the limit,
    so a practical onset is reported where ``|P'| <= eps_derivative``
    (default ``DERIVATIVE_EPS_RATIO * lambda``).

    Raises:
        InputError: For non-TWIN penalties
    """
    if isinstance(spec, TwinBParams):
        return GammaRegion(onset=spec.d2, limit_only=False, practical_onset=spec.d2)
    if isinstance(spec, TwinAParams):
        if eps_derivative is None:
            eps_derivative = get_settings().DERIVATIVE_EPS_RATIO * spec.lam
        if not eps_derivative > 0:
            raise InputError(f"eps_derivative must be positive, got {eps_derivative}")
        # |P'(t)| = (16/27) lam tau^2 / t^2 on the tail
        practical = spec.tau * math.sqrt(kernels.TWIN_A_TAIL * spec.lam / eps_derivative)
        practical = max(practical, spec.m1 * spec.tau)
        return GammaRegion(
            onset=math.inf,
            limit_only=True,
            practical_onset=practical,
            eps_derivative=eps_derivative,
        )
    raise InputError(f"gamma region is defined for TWIN penalties only, got {spec.kind}")


def min_gap(spec: PenaltySpec) -> float:
    """Minimum over ``t >= 0`` of ``t + P'(t)``, with P'(0) read as lambda.

    Each TWIN branch of ``t + P'(t)`` is linear or monotone, so the minimum
    sits at the origin or at a breakpoint. The result is negative once
    lambda is large enough relative to tau.
    """
    lam = spec.lam
    if isinstance(spec, TwinAParams):
        knee = spec.m1 * spec.tau
        # tail: t - (16/27) lam tau^2 / t^2 is increasing, so the knee wins
        return min(lam, knee + lam * (1.0 - spec.m1))
    if isinstance(spec, TwinBParams):
        knee = spec.m2 * spec.tau
        return min(lam, knee + lam * (1.0 - spec.m2), spec.d2)
    return lam


def zero_threshold(spec: PenaltySpec) -> float:
    """Largest input magnitude that the thresholding operator maps to zero."""
    lam = spec.lam
    if not spec.is_twin or lam <= spec.tau:
        return lam
    args = spec.kernel_args()
    lo, hi = 0.0, lam
    if kernels.threshold(*args, hi) == 0.0:
        return hi
    for _ in range(_ZERO_THRESHOLD_STEPS):
        mid = 0.5 * (lo + hi)
        if kernels.threshold(*args, mid) == 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            break
    logger.debug("zero threshold for %s at lambda=%g: %.12g", spec.label(), lam, lo)
    return lo
