"""Coordinate descent and MCLLA solvers, lambda paths and KKT diagnostics.

The objective is ``0.5 * ||y - X beta||^2 + sum_j P(|beta_j|)`` on a design
whose columns have unit Euclidean norm.
"""
import logging
from typing import Optional

import numpy as np

from twinreg.config import get_settings
from twinreg.errors import InputError
from twinreg.models.penalty_models import PenaltySpec
from twinreg.models.solver_models import (
    Algorithm,
    FitResult,
    KktReport,
    PathResult,
    Problem,
    SolverConfig,
)
from twinreg.services import penalty
from twinreg.services.base import BaseSolver
from twinreg.utils import kernels

logger = logging.getLogger(__name__)

_LAMBDA_MAX_DOUBLINGS = 200
_LAMBDA_MAX_BISECTIONS = 100


def standardize(problem: Problem, center_response: bool = False) -> Problem:
    """Rescale every column of ``X`` to unit Euclidean norm.

    The returned problem records the pre-standardization norms so that
    coefficients can be mapped back with :func:`destandardize`.

    Args:
        problem: Problem on its original scale
        center_response: Also subtract the mean of ``y``

    Returns:
        A new standardized problem

    Raises:
        InputError: If a column has zero norm
    """
    norms = np.sqrt(np.einsum("ij,ij->j", problem.X, problem.X))
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise InputError(f"column {int(zero[0])} of X has zero norm and cannot be standardized")
    y = problem.y
    offset = 0.0
    if center_response:
        offset = float(np.mean(y))
        y = y - offset
    return Problem(
        y=y,
        X=problem.X / norms,
        standardized=True,
        column_norms=problem.norms * norms,
        y_offset=problem.y_offset + offset,
    )


def scale_factors(problem: Problem) -> np.ndarray:
    """Multipliers that took each original column to unit norm."""
    return 1.0 / problem.norms


def destandardize(problem: Problem, beta: np.ndarray) -> np.ndarray:
    """Map standardized-scale coefficients back to the original design."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (problem.p,):
        raise InputError(f"beta has shape {beta.shape}, expected ({problem.p},)")
    return beta / problem.norms


def lambda_max(problem: Problem) -> float:
    """``max_j |x_j' y|``, the smallest lambda at which the Lasso fit is empty."""
    return float(np.max(np.abs(problem.X.T @ problem.y)))


def path_lambda_max(problem: Problem, template: PenaltySpec) -> float:
    """Smallest lambda at which zero is a fixed point of coordinate descent for ``template``.

    For the comparators and for TWIN penalties with ``lambda <= tau`` this is
    :func:`lambda_max`. Otherwise the TWIN thresholding operator zeroes
    less than lambda, so the level is raised until it zeroes every
    ``|x_j' y|``.
    """
    z_max = lambda_max(problem)
    if z_max == 0.0:
        return 0.0
    if penalty.zero_threshold(template.with_lambda(z_max)) >= z_max:
        return z_max
    lo, hi = z_max, 2.0 * z_max
    for _ in range(_LAMBDA_MAX_DOUBLINGS):
        if penalty.zero_threshold(template.with_lambda(hi)) >= z_max:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise InputError(f"no lambda empties the fit for {template.label()}")
    for _ in range(_LAMBDA_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if penalty.zero_threshold(template.with_lambda(mid)) >= z_max:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-12 * hi:
            break
    logger.debug("path start for %s raised from %g to %g", template.label(), z_max, hi)
    return hi


def objective(problem: Problem, spec: PenaltySpec, beta: np.ndarray) -> float:
    r = problem.y - problem.X @ beta
    return float(0.5 * (r @ r) + np.sum(penalty.values(spec, beta)))


def kkt_check(
    problem: Problem,
    spec: PenaltySpec,
    beta: np.ndarray,
    tol: Optional[float] = None,
) -> KktReport:
    """First-order optimality residual of ``beta``.

    For active coordinates the violation is ``|x_j' r - sgn(beta_j) P'(|beta_j|)|``,
    for inactive ones ``max(0, |x_j' r| - lambda)``.

    Raises:
        InputError: If ``beta`` does not match the design
    """
    if tol is None:
        tol = get_settings().KKT_TOL
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape != (problem.p,):
        raise InputError(f"beta has shape {beta.shape}, expected ({problem.p},)")
    grad = problem.X.T @ (problem.y - problem.X @ beta)
    active = beta != 0.0
    violation = np.maximum(np.abs(grad) - spec.lam, 0.0)
    if np.any(active):
        slope = np.sign(beta[active]) * penalty.derivatives(spec, beta[active])
        violation[active] = np.abs(grad[active] - slope)
    worst = float(np.max(violation))
    return KktReport(max_violation=worst, passed=worst <= tol)


def fit_orthogonal(problem: Problem, spec: PenaltySpec, tol: float = 1e-8) -> FitResult:
    """One-shot fit for an orthonormal design: ``beta_j = threshold(x_j' y)``.

    Raises:
        InputError: If ``X' X`` differs from the identity by more than ``tol``
    """
    gram_error = float(np.max(np.abs(problem.X.T @ problem.X - np.eye(problem.p))))
    if gram_error > tol:
        raise InputError(f"design is not orthonormal: max |X'X - I| = {gram_error:.3g}")
    beta = penalty.thresholds(spec, problem.X.T @ problem.y)
    beta.setflags(write=False)
    return FitResult(
        beta=beta,
        active_set=tuple(int(j) for j in np.flatnonzero(beta)),
        objective=objective(problem, spec, beta),
        sweeps_used=0,
        converged=True,
        kkt_max_violation=kkt_check(problem, spec, beta).max_violation,
        lam=spec.lam,
        algorithm=Algorithm.CD,
    )


class CoordinateDescentSolver(BaseSolver):
    """Coordinate descent with the exact global univariate minimizer at every step.

    Each update can only lower the objective, so the objective is
    nonincreasing across sweeps.
    """

    algorithm = Algorithm.CD

    def fit(
        self,
        problem: Problem,
        spec: PenaltySpec,
        warm_start: Optional[np.ndarray] = None,
    ) -> FitResult:
        self._check_problem(problem)
        beta, r = self._init_state(problem, warm_start)
        X = problem.X
        args = spec.kernel_args()
        rng = self._rng()
        everything = np.arange(problem.p, dtype=np.int64)
        use_active_set = problem.p > self.config.active_set_min_p

        sweeps = 0
        converged = False
        while sweeps < self.config.max_sweeps:
            change = kernels.cd_sweep(X, r, beta, self._order(everything, rng), *args)
            sweeps += 1
            self._after_sweep(problem, spec, change, beta)
            if self._is_small(change, beta):
                converged = True
                break
            if use_active_set:
                sweeps = self._cycle_active(problem, spec, beta, r, rng, sweeps)

        logger.debug("cd %s lambda=%g: %d sweeps, converged=%s", spec.label(), spec.lam, sweeps, converged)
        return self._finish(problem, spec, beta, sweeps, converged)

    def _cycle_active(
        self,
        problem: Problem,
        spec: PenaltySpec,
        beta: np.ndarray,
        r: np.ndarray,
        rng: np.random.Generator,
        sweeps: int,
    ) -> int:
        # sweep the current support until it settles; the caller then re-checks every coordinate
        args = spec.kernel_args()
        while sweeps < self.config.max_sweeps:
            active = np.flatnonzero(beta).astype(np.int64)
            if active.size == 0:
                break
            change = kernels.cd_sweep(problem.X, r, beta, self._order(active, rng), *args)
            sweeps += 1
            self._after_sweep(problem, spec, change, beta)
            if self._is_small(change, beta):
                break
        return sweeps


class MclaSolver(BaseSolver):
    """Multi-stage convex relaxation through local linear approximation.

    Each outer iteration freezes the weights ``w_j = P'(|beta_j|)`` (lambda at
    zero) and solves the weighted-l1 surrogate by coordinate descent.
    Negative weights make the surrogate nonconvex; its coordinate update
    then enlarges the coefficient. The outer loop stops once the sign
    pattern no longer changes.
    """

    algorithm = Algorithm.MCLLA

    def fit(
        self,
        problem: Problem,
        spec: PenaltySpec,
        warm_start: Optional[np.ndarray] = None,
    ) -> FitResult:
        if not spec.is_twin:
            raise InputError(f"MCLLA is implemented for TWIN penalties, got {spec.kind}")
        self._check_problem(problem)
        beta, r = self._init_state(problem, warm_start)
        X = problem.X
        rng = self._rng()
        everything = np.arange(problem.p, dtype=np.int64)

        sweeps = 0
        inner_converged = False
        sign_stable = False
        signs = np.sign(beta)
        for outer in range(self.config.lla_outer_iters):
            weights = penalty.derivatives(spec, beta)
            inner_converged = False
            for _ in range(self.config.max_sweeps):
                change = kernels.weighted_l1_sweep(X, r, beta, self._order(everything, rng), weights)
                sweeps += 1
                self._after_sweep(problem, spec, change, beta)
                if self._is_small(change, beta):
                    inner_converged = True
                    break
            new_signs = np.sign(beta)
            sign_stable = bool(np.array_equal(new_signs, signs))
            signs = new_signs
            logger.debug(
                "mclla %s lambda=%g outer %d: |A|=%d, inner converged=%s, signs stable=%s",
                spec.label(),
                spec.lam,
                outer + 1,
                int(np.count_nonzero(beta)),
                inner_converged,
                sign_stable,
            )
            if sign_stable:
                break

        return self._finish(problem, spec, beta, sweeps, inner_converged and sign_stable)


def make_solver(
    algorithm: Algorithm = Algorithm.CD,
    config: Optional[SolverConfig] = None,
) -> BaseSolver:
    if Algorithm(algorithm) == Algorithm.MCLLA:
        return MclaSolver(config)
    return CoordinateDescentSolver(config)


def fit_cd(
    problem: Problem,
    spec: PenaltySpec,
    config: Optional[SolverConfig] = None,
    warm_start: Optional[np.ndarray] = None,
) -> FitResult:
    """Fit by coordinate descent. See :class:`CoordinateDescentSolver`."""
    return CoordinateDescentSolver(config).fit(problem, spec, warm_start)


def fit_mclla(
    problem: Problem,
    spec: PenaltySpec,
    config: Optional[SolverConfig] = None,
    warm_start: Optional[np.ndarray] = None,
) -> FitResult:
    """Fit by MCLLA. See :class:`MclaSolver`."""
    return MclaSolver(config).fit(problem, spec, warm_start)


def lambda_grid(start: float, n_lambda: int, lambda_min_ratio: float) -> np.ndarray:
    """Geometric grid from ``start`` down to ``start * lambda_min_ratio``."""
    if n_lambda < 1:
        raise InputError(f"n_lambda must be at least 1, got {n_lambda}")
    if not 0.0 < lambda_min_ratio < 1.0:
        raise InputError(f"lambda_min_ratio must lie in (0, 1), got {lambda_min_ratio}")
    if n_lambda == 1:
        return np.array([start])
    return start * np.power(lambda_min_ratio, np.arange(n_lambda) / (n_lambda - 1))


def default_lambda_min_ratio(problem: Problem) -> float:
    settings = get_settings()
    if problem.p > problem.n:
        return settings.LAMBDA_MIN_RATIO_HIGH_DIM
    return settings.LAMBDA_MIN_RATIO_LOW_DIM


def fit_path(
    problem: Problem,
    template: PenaltySpec,
    n_lambda: Optional[int] = None,
    lambda_min_ratio: Optional[float] = None,
    config: Optional[SolverConfig] = None,
    algorithm: Algorithm = Algorithm.CD,
    lambdas: Optional[np.ndarray] = None,
) -> PathResult:
    """Fit a warm-started path over a decreasing lambda grid with tau held fixed.

    The grid starts at :func:`path_lambda_max`, so the first fit is empty.
    An explicit ``lambdas`` array overrides the generated grid.

    Raises:
        InputError: On a bad grid or when the response is orthogonal to every column
    """
    settings = get_settings()
    if lambdas is None:
        start = path_lambda_max(problem, template)
        if start == 0.0:
            raise InputError("X' y is zero; every lambda gives the empty fit")
        grid = lambda_grid(
            start,
            n_lambda if n_lambda is not None else settings.N_LAMBDA,
            lambda_min_ratio if lambda_min_ratio is not None else default_lambda_min_ratio(problem),
        )
    else:
        grid = np.asarray(lambdas, dtype=np.float64)
        if grid.ndim != 1 or grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
            raise InputError("lambdas must be a nonempty strictly decreasing positive sequence")

    solver = make_solver(algorithm, config)
    fits = []
    warm: Optional[np.ndarray] = None
    for k, lam in enumerate(grid):
        fit = solver.fit(problem, template.with_lambda(float(lam)), warm_start=warm)
        fits.append(fit)
        warm = fit.beta
        logger.debug("path %s step %d lambda=%g |A|=%d", template.label(), k, lam, len(fit.active_set))
    logger.info(
        "Fitted %s path: %d lambdas from %g to %g",
        template.label(),
        grid.size,
        grid[0],
        grid[-1],
    )
    tau = getattr(template, "tau", None)
    return PathResult(
        lambdas=grid,
        fits=fits,
        tau=tau,
        spec=template,
        algorithm=Algorithm(algorithm),
    )
